"""Compiled inner loops for the ansatz forward sweep.

A gate whose generator terms pairwise commute factorizes as
``prod_t (cos(theta c_t) - i sin(theta c_t) P_t)``. Each Pauli term is stored
as a flip mask ``x`` and a phase vector ``d`` with ``(P v)[b] = d[b] v[b ^ x]``.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _rotate_row(row, x, d, a, s):
    dim = row.size
    if x == 0:
        for b in range(dim):
            row[b] *= a + s * d[b]
    else:
        for b in range(dim):
            bb = b ^ x
            if b < bb:
                v0 = row[b]
                v1 = row[bb]
                row[b] = a * v0 + s * d[b] * v1
                row[bb] = a * v1 + s * d[bb] * v0


@njit(cache=True, fastmath=True)
def forward_sweep(ref, angles, starts, xs, coefs, phases, work):
    """Fill ``work[:, 0]`` with the circuit state and ``work[:, k+1]`` with d/d(angle_k).

    ``work`` is ``(dim, n_gates + 1)`` so the innermost loop runs over the live
    columns. ``angles`` holds one angle per gate (already gathered from slots).
    """
    n_gates = starts.size - 1
    dim = ref.size
    for b in range(dim):
        work[b, 0] = ref[b]
    for k in range(n_gates):
        th = angles[k]
        live = k + 1
        for t in range(starts[k], starts[k + 1]):
            a = np.cos(th * coefs[t])
            sn = np.sin(th * coefs[t])
            x = xs[t]
            d = phases[t]
            if x == 0:
                for b in range(dim):
                    f = a - 1j * sn * d[b]
                    for c in range(live):
                        work[b, c] *= f
            else:
                for b in range(dim):
                    bb = b ^ x
                    if b < bb:
                        s0 = -1j * sn * d[b]
                        s1 = -1j * sn * d[bb]
                        for c in range(live):
                            v0 = work[b, c]
                            v1 = work[bb, c]
                            work[b, c] = a * v0 + s0 * v1
                            work[bb, c] = a * v1 + s1 * v0
        for b in range(dim):
            work[b, live] = 0.0
        for t in range(starts[k], starts[k + 1]):
            x = xs[t]
            f = -1j * coefs[t]
            d = phases[t]
            for b in range(dim):
                work[b, live] += f * d[b] * work[b ^ x, 0]


@njit(cache=True, fastmath=True)
def circuit_state(ref, angles, starts, xs, coefs, phases):
    psi = ref.copy()
    for k in range(starts.size - 1):
        th = angles[k]
        for t in range(starts[k], starts[k + 1]):
            _rotate_row(psi, xs[t], phases[t], np.cos(th * coefs[t]), -1j * np.sin(th * coefs[t]))
    return psi
