"""Command-line front end: ``vqsim run | validate | presets | resources``.

Configs are JSON objects. ``--config`` takes a file path or the name of a
shipped preset. Every ``run`` writes an aggregate CSV plus ``manifest.json``
into the output directory.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
import warnings
from dataclasses import asdict, fields
from importlib import resources as importlib_resources
from pathlib import Path

import numpy as np

from . import __version__, oracles
from .ansatz import Ansatz, build_hamiltonian_ansatz, pauli_rotation_ansatz
from .engine import (
    INITIAL,
    SELF,
    EvolutionError,
    GeneralizedEvolutionProblem,
    Term,
    Tikhonov,
    TruncatedSpectrum,
    evolve,
    imag_time_problem,
    parse_estimator,
    real_time_problem,
    write_timeseries_csv,
)
from .linalg import (
    EngineConfig,
    RouteSteps,
    ZeroOutputError,
    apply_svd_route,
    build_svd_route,
    multiply_via_normalized_path,
    multiply_via_path,
    solve_linear_system,
)
from .open_system import (
    LindbladModel,
    average_trajectories,
    build_ising_benchmark,
    default_jump_routes,
    run_trajectories,
    RATE_WARNING,
)
from .pauli import OperatorSum, parse_operator
from .resources import CostInputs, circuits_per_step, cost_table
from .states import StateVector

TASKS = ("real-time", "imag-time", "general", "linalg-multiply", "linalg-solve", "open-system", "resources")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# config loading --------------------------------------------------------------


def preset_names() -> list[str]:
    root = importlib_resources.files("vqsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    root = importlib_resources.files("vqsim") / "presets"
    path = root / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text())


def load_config(ref: str) -> tuple[dict, Path]:
    """Config dict and the directory relative paths resolve against."""
    path = Path(ref)
    if path.is_file():
        try:
            return json.loads(path.read_text()), path.resolve().parent
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    name = ref[len("preset:") :] if ref.startswith("preset:") else ref
    if name in preset_names():
        return load_preset(name), Path.cwd()
    raise ConfigError(f"config {ref!r} is neither a readable file nor a preset name")


def _field(cfg: dict, key: str, kind=None, default=...):
    if key not in cfg:
        if default is ...:
            raise ConfigError(f"missing field {key!r}")
        return default
    val = cfg[key]
    if kind is not None:
        try:
            val = kind(val)
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r}: cannot interpret {val!r} as {kind.__name__}") from None
    return val


def _operator(text, n: int, where: str) -> OperatorSum:
    try:
        return parse_operator(str(text), n)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _state(node, n: int, where: str) -> StateVector:
    try:
        if isinstance(node, str):
            return StateVector.basis(n, node)
        amps = [complex(re, im) for re, im in node]
        return StateVector(amps).normalized()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_model(cfg: dict):
    """``(LindbladModel, benchmark observable or None)`` from ``cfg['model']``."""
    node = _field(cfg, "model")
    if not isinstance(node, dict):
        raise ConfigError("field 'model' must be an object")
    if node.get("benchmark") == "ising":
        model, _, C = build_ising_benchmark(
            float(node.get("J", 1.0)), float(node.get("h_x", 1.0)), float(node.get("gamma", 1.0)), bool(node.get("dissipative", True))
        )
        return model, C
    if "benchmark" in node:
        raise ConfigError(f"model.benchmark: unknown benchmark {node['benchmark']!r}")
    n = _field(node, "num_qubits", int)
    H = _operator(_field(node, "hamiltonian"), n, "model.hamiltonian")
    ls = [_operator(t, n, f"model.lindblad[{i}]") for i, t in enumerate(node.get("lindblad", []))]
    try:
        return LindbladModel(H, ls), None
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def build_ansatz(node, base: Path, reference: StateVector | None = None, num_qubits: int | None = None, scale=False) -> Ansatz:
    if node is None or node == "pauli-rotations":
        if reference is None:
            reference = StateVector.basis(num_qubits, 0)
        return pauli_rotation_ansatz(reference, scale=scale)
    if node == "ising-hamiltonian":
        return build_hamiltonian_ansatz()
    if isinstance(node, str):
        path = Path(node) if Path(node).is_absolute() else base / node
        if not path.is_file():
            raise ConfigError(f"ansatz file not found: {path}")
        try:
            node = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(node, dict):
        raise ConfigError("field 'ansatz' must be a preset name, a file path or an object")
    try:
        ans = Ansatz.from_dict(node)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"ansatz: {exc}") from None
    if reference is not None:
        ans = Ansatz(reference, ans.gates, scale=ans.scale or scale, name=ans.name)
    return ans


def _observables(cfg: dict, n: int, benchmark_C) -> dict[str, OperatorSum]:
    out = {}
    for name, text in cfg.get("observables", {}).items():
        if text == "benchmark:C":
            if benchmark_C is None:
                raise ConfigError(f"observables.{name}: 'benchmark:C' needs the ising benchmark model")
            out[name] = benchmark_C
        else:
            out[name] = _operator(text, n, f"observables.{name}")
    return out


def _regularization(cfg: dict):
    node = cfg.get("regularization", "tikhonov")
    if node == "tikhonov":
        return Tikhonov()
    if isinstance(node, dict) and node.get("kind") == "tikhonov":
        return Tikhonov(node.get("lambda"), node.get("relative", 1e-6))
    if node == "truncated" or (isinstance(node, dict) and node.get("kind") == "truncated"):
        return TruncatedSpectrum(node.get("cutoff", 1e-8) if isinstance(node, dict) else 1e-8)
    raise ConfigError(f"regularization: unknown setting {node!r}")


def _matrix(cfg: dict, n: int):
    node = _field(cfg, "matrix")
    if isinstance(node, str):
        return _operator(node, n, "matrix")
    try:
        dense = np.array([[complex(re, im) for re, im in row] for row in node])
    except (TypeError, ValueError):
        raise ConfigError("matrix: expected an operator literal or rows of [re, im] pairs") from None
    from .pauli import pauli_decompose

    if dense.shape != (1 << n, 1 << n):
        raise ConfigError(f"matrix: shape {dense.shape} does not match {n} qubits")
    return pauli_decompose(dense)


# task runners ----------------------------------------------------------------


def _prepared(cfg: dict, base: Path):
    """Shared resolution used by both ``run`` and ``validate``."""
    task = _field(cfg, "task")
    if task not in TASKS:
        raise ConfigError(f"task: must be one of {', '.join(TASKS)}, got {task!r}")
    out = {"task": task}
    if task == "resources":
        try:
            out["inputs"] = CostInputs(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.get("inputs", {}).items()})
        except TypeError as exc:
            raise ConfigError(f"inputs: {exc}") from None
        return out
    linalg = task in ("linalg-multiply", "linalg-solve")
    out["T"] = _field(cfg, "T", float, 1.0 if linalg else ...)
    out["dt"] = _field(cfg, "dt", float, 1e-3 if linalg else ...)
    if not (out["dt"] > 0 and out["T"] >= out["dt"]):
        raise ConfigError("need dt > 0 and T >= dt")
    try:
        out["estimator"] = parse_estimator(str(cfg.get("estimator", "exact")))
    except ValueError as exc:
        raise ConfigError(f"estimator: {exc}") from None
    out["regularization"] = _regularization(cfg)
    if task in ("linalg-multiply", "linalg-solve"):
        n = _field(cfg, "num_qubits", int)
        out["matrix"] = _matrix(cfg, n)
        out["initial_state"] = _state(cfg.get("initial_state", "0" * n), n, "initial_state")
        variant = cfg.get("variant", "path")
        if variant not in ("path", "normalized", "svd"):
            raise ConfigError(f"variant: must be path, normalized or svd, got {variant!r}")
        out["variant"] = variant
        scale = variant == "path" or task == "linalg-solve"
        out["ansatz"] = build_ansatz(cfg.get("ansatz"), base, out["initial_state"], n, scale=scale)
        out["observables"] = _observables(cfg, n, None)
        return out
    if task == "general":
        n = _field(cfg, "num_qubits", int)
        terms = []
        for i, t in enumerate(_field(cfg, "terms")):
            src = t.get("source", "self")
            if src not in (SELF, INITIAL):
                src = _state(src, n, f"terms[{i}].source")
            terms.append(Term(_operator(t["operator"], n, f"terms[{i}].operator"), src))
        B = _operator(cfg["B"], n, "B") if "B" in cfg else None
        out["problem"] = GeneralizedEvolutionProblem(n, terms, out["T"], out["dt"], B=B)
        ref = _state(cfg["initial_state"], n, "initial_state") if "initial_state" in cfg else None
        out["ansatz"] = build_ansatz(cfg.get("ansatz"), base, ref, n, scale=bool(cfg.get("scale", True)))
        out["observables"] = _observables(cfg, n, None)
        return out
    model, C = build_model(cfg)
    out["model"] = model
    n = model.num_qubits
    ref = _state(cfg["initial_state"], n, "initial_state") if "initial_state" in cfg else None
    out["ansatz"] = build_ansatz(cfg.get("ansatz"), base, ref, n)
    if out["ansatz"].num_qubits != n:
        raise ConfigError(f"ansatz acts on {out['ansatz'].num_qubits} qubits, model on {n}")
    out["observables"] = _observables(cfg, n, C)
    if task == "open-system":
        out["n_trajectories"] = _field(cfg, "n_trajectories", int, 1)
        jump = cfg.get("jump", {})
        out["jump_alpha"] = float(jump.get("alpha", 6.0))
        out["route_steps"] = RouteSteps(float(jump.get("dt_V", 0.01)), float(jump.get("dt_D", 0.1)), float(jump.get("dt_U", 0.01)))
    return out


def _exact_reference(prep: dict, times) -> dict[str, np.ndarray]:
    """Exact observables on the output grid for ``compare_exact``."""
    model = prep["model"]
    psi0 = prep["ansatz"].prepare(prep["ansatz"].initial_parameters()).amplitudes
    out = {}
    if prep["task"] == "open-system":
        _, rhos = oracles.exact_lindblad(model, psi0, prep["T"], prep["dt"])
        for k, op in prep["observables"].items():
            out[k] = np.einsum("tij,ji->t", rhos, oracles.to_dense(op)).real
    else:
        _, states = oracles.exact_schrodinger(model.H, psi0, prep["T"], prep["dt"])
        for k, op in prep["observables"].items():
            out[k] = np.einsum("ti,ij,tj->t", states.conj(), oracles.to_dense(op), states).real
    return out


def execute(cfg: dict, base: Path, out_dir: Path, workers: int = 1, dump_trajectories: bool = False, log=print) -> dict:
    """Run one resolved config; returns the summary stored in the manifest."""
    prep = _prepared(cfg, base)
    task = prep["task"]
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"task": task, "outputs": []}
    if task == "resources":
        table = cost_table(prep["inputs"])
        (out_dir / "resources.json").write_text(json.dumps(table, indent=2) + "\n")
        summary["outputs"].append("resources.json")
        summary["table"] = table
        return summary

    if task == "open-system":
        model, ansatz = prep["model"], prep["ansatz"]
        routes = default_jump_routes(model, prep["jump_alpha"])
        n_traj = prep["n_trajectories"]
        step = max(1, n_traj // 20)

        def progress(done):
            if done % step == 0 or done == n_traj:
                log(f"  {done}/{n_traj} trajectories")

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            records = run_trajectories(
                model,
                ansatz,
                ansatz.initial_parameters(),
                prep["T"],
                prep["dt"],
                n_traj,
                master_seed=int(cfg.get("seed", 0)),
                workers=workers,
                progress=progress,
                jump_routes=routes,
                estimator=prep["estimator"],
                regularization=prep["regularization"],
                observables=prep["observables"],
                route_steps=prep["route_steps"],
                record_parameters=dump_trajectories,
            )
        cols = {}
        times = records[0].times
        for name in prep["observables"]:
            _, mean, se = average_trajectories(records, name)
            cols[f"{name}_mean"] = mean
            cols[f"{name}_stderr"] = se
        if cfg.get("compare_exact"):
            for name, ref in _exact_reference(prep, times).items():
                cols[f"{name}_exact"] = ref
                dev = np.abs(cols[f"{name}_mean"] - ref)
                summary[f"{name}_max_deviation"] = float(dev.max())
        write_timeseries_csv(out_dir / "aggregate.csv", times, None, cols)
        summary["outputs"].append("aggregate.csv")
        jumps = [r.num_jumps for r in records]
        summary["mean_jumps"] = float(np.mean(jumps))
        summary["rate_warnings"] = sum(bool(r.warnings) for r in records)
        if dump_trajectories:
            tdir = out_dir / "trajectories"
            tdir.mkdir(exist_ok=True)
            for i, r in enumerate(records):
                write_timeseries_csv(tdir / f"traj_{i:05d}.csv", r.times, r.thetas, r.observables)
            with open(tdir / "jumps.csv", "w") as fh:
                fh.write("trajectory,t,channel\n")
                for i, r in enumerate(records):
                    for t, k in r.jump_events:
                        fh.write(f"{i},{t:.17g},{k}\n")
            summary["outputs"].append("trajectories/")
        return summary

    ansatz = prep["ansatz"]
    theta0 = ansatz.initial_parameters()
    if task in ("real-time", "imag-time"):
        make = real_time_problem if task == "real-time" else imag_time_problem
        problem = make(prep["model"].H, prep["T"], prep["dt"])
    elif task == "general":
        problem = prep["problem"]
    else:
        problem = None

    if problem is not None:
        res = evolve(problem, ansatz, theta0, prep["estimator"], prep["observables"], prep["regularization"])
        cols = dict(res.observables)
        if cfg.get("compare_exact") and task == "real-time":
            for name, ref in _exact_reference(prep, res.times).items():
                cols[f"{name}_exact"] = ref
                summary[f"{name}_max_deviation"] = float(np.abs(res.observables[name] - ref).max())
        write_timeseries_csv(out_dir / "timeseries.csv", res.times, res.thetas, cols)
        summary["outputs"].append("timeseries.csv")
        summary["final_theta"] = res.final_theta.tolist()
        return summary

    # linear algebra
    M = prep["matrix"]
    v0 = prep["initial_state"].amplitudes
    dense = M.act(np.eye(len(v0), dtype=complex))
    engine = EngineConfig(prep["dt"], prep["T"], prep["estimator"], prep["regularization"])
    if task == "linalg-solve":
        if prep["variant"] != "path":
            raise ConfigError("variant: linalg-solve supports only the path variant")
        res = solve_linear_system(M, ansatz, theta0, engine, prep["observables"])
        target = np.linalg.solve(dense, v0)
    elif prep["variant"] == "path":
        res = multiply_via_path(M, ansatz, theta0, engine, prep["observables"])
        target = dense @ v0
    elif prep["variant"] == "normalized":
        res = multiply_via_normalized_path(M, ansatz, theta0, engine, prep["observables"])
        target = dense @ v0
    else:
        jump = cfg.get("jump", {})
        if "alpha" in jump:
            route = build_svd_route(M, alpha=float(jump["alpha"]))
        else:
            route = build_svd_route(M, eps_D=float(jump.get("eps_D", 1e-3)), C=float(np.vdot(dense @ v0, dense @ v0).real))
        steps = RouteSteps(float(jump.get("dt_V", 0.01)), float(jump.get("dt_D", 0.1)), float(jump.get("dt_U", 0.01)))
        theta = apply_svd_route(route, ansatz, theta0, None, steps, prep["regularization"], prep["estimator"])
        res = None
        target = dense @ v0
        summary["route"] = {"H_V": str(route.H_V), "T_V": route.T_V, "H_D": str(route.H_D), "T_D": route.T_D, "H_U": str(route.H_U), "T_U": route.T_U}
    if res is not None:
        write_timeseries_csv(out_dir / "timeseries.csv", res.times, res.thetas, res.observables)
        summary["outputs"].append("timeseries.csv")
        theta = res.final_theta
    out = ansatz.prepare(theta).amplitudes
    fid = abs(np.vdot(out, target)) ** 2 / (np.vdot(out, out).real * np.vdot(target, target).real)
    summary.update(
        final_theta=np.asarray(theta).tolist(),
        final_state=[[float(a.real), float(a.imag)] for a in out],
        fidelity_vs_dense=float(fid),
        norm_ratio=float(np.linalg.norm(out) / np.linalg.norm(target)),
    )
    with open(out_dir / "result.csv", "w") as fh:
        fh.write("index,re,im,target_re,target_im\n")
        for i, (a, b) in enumerate(zip(out, target)):
            fh.write(f"{i},{a.real:.17g},{a.imag:.17g},{b.real:.17g},{b.imag:.17g}\n")
    summary["outputs"].append("result.csv")
    return summary


def validate_config(cfg: dict, base: Path) -> tuple[list[str], list[str], str]:
    """``(errors, warnings, summary line)`` without running anything."""
    errors: list[str] = []
    notes: list[str] = []
    try:
        prep = _prepared(cfg, base)
    except ConfigError as exc:
        return [str(exc)], notes, ""
    except (KeyError, TypeError, ValueError) as exc:
        return [f"{type(exc).__name__}: {exc}"], notes, ""
    if prep["task"] == "resources":
        return errors, notes, "OK, resource table"
    ansatz = prep["ansatz"]
    steps = max(1, int(round(prep["T"] / prep["dt"])))
    if "model" in prep:
        model = prep["model"]
        worst = sum(model.channel_norms()) * prep["dt"]
        if worst > RATE_WARNING:
            notes.append(f"gamma*dt can reach {worst:.3g} > {RATE_WARNING}: first-order jump probabilities are inaccurate")
    n_d = max((len(g.generator) for g in ansatz.gates), default=1)
    preview = circuits_per_step(CostInputs(N_P=max(1, ansatz.num_parameters), N_D=n_d))
    line = f"OK, {ansatz.num_parameters} parameters, {ansatz.num_qubits} qubits, {steps} steps"
    notes.append(f"cost preview: {preview} distinct circuits per step (single-term B and A)")
    return errors, notes, line


# entry point -----------------------------------------------------------------


def _versions() -> dict:
    import numba
    import scipy

    return {
        "vqsim": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.estimator is not None:
        cfg["estimator"] = args.estimator
    if getattr(args, "n_trajectories", None) is not None:
        cfg["n_trajectories"] = args.n_trajectories
    return cfg


def cmd_run(args) -> int:
    try:
        cfg, base = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        out_dir = Path(args.out)
        t0 = time.perf_counter()
        summary = execute(cfg, base, out_dir, args.workers, args.trajectories, log=lambda m: print(m, file=sys.stderr))
        wall = time.perf_counter() - t0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EvolutionError, ZeroOutputError) as exc:
        step = getattr(exc, "step", None)
        print(f"numerical abort{'' if step is None else f' at step {step}'}: {exc}", file=sys.stderr)
        return 3
    manifest = {
        "config": cfg,
        "config_source": args.config,
        "seed": cfg.get("seed"),
        "workers": args.workers,
        "versions": _versions(),
        "wall_time_seconds": wall,
        "command": sys.argv,
        "summary": summary,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    for k, v in summary.items():
        if k not in ("outputs", "final_theta", "final_state"):
            print(f"{k}: {v}")
    print(f"wrote {', '.join(summary['outputs'])} and manifest.json to {out_dir}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg, base = load_config(args.config)
    except ConfigError as exc:
        print(f"ERROR {exc}")
        return 1
    errors, notes, line = validate_config(_apply_overrides(cfg, args), base)
    for e in errors:
        print(f"ERROR {e}")
    if not errors:
        print(line)
    for n in notes:
        print(f"WARNING {n}" if "gamma*dt" in n else n)
    return 1 if errors else 0


def cmd_presets(args) -> int:
    if args.name:
        try:
            print(json.dumps(load_preset(args.name), indent=2))
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0
    for name in preset_names():
        print(f"{name:24s} {load_preset(name).get('description', '')}")
    return 0


def cmd_resources(args) -> int:
    try:
        if args.config:
            cfg, _ = load_config(args.config)
            raw = cfg.get("inputs", cfg)
        else:
            raw = {}
        for item in args.set or []:
            key, _, val = item.partition("=")
            raw[key] = json.loads(val)
        names = {f.name for f in fields(CostInputs)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown cost inputs: {', '.join(sorted(unknown))}")
        inputs = CostInputs(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
        table = cost_table(inputs)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps({"inputs": asdict(inputs), "estimates": table}, indent=2))
    else:
        for k, v in table.items():
            print(f"{k:14s} {v:.6g}" if isinstance(v, float) else f"{k:14s} {v}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vqsim", description="Variational simulation of general quantum processes")
    p.add_argument("--version", action="version", version=f"vqsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="config JSON path or preset name")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--estimator", help="'exact' or 'shots:N'")
        sp.add_argument("--n-trajectories", type=int, help="override the trajectory count")

    r = sub.add_parser("run", help="run an experiment")
    common(r)
    r.add_argument("--workers", type=int, default=1, help="trajectory worker processes")
    r.add_argument("--out", default="vqsim-out", help="output directory")
    r.add_argument("--trajectories", action="store_true", help="also write per-trajectory CSVs")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config without running it")
    common(v)
    v.set_defaults(func=cmd_validate)

    pr = sub.add_parser("presets", help="list shipped presets or print one")
    pr.add_argument("name", nargs="?")
    pr.set_defaults(func=cmd_presets)

    rs = sub.add_parser("resources", help="print the measurement-cost table")
    rs.add_argument("--config", help="JSON file with CostInputs fields (optionally under 'inputs')")
    rs.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one input, value in JSON")
    rs.add_argument("--json", action="store_true", help="emit JSON instead of a text table")
    rs.set_defaults(func=cmd_resources)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
