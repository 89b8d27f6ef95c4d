"""Shared test utilities: finite-difference gradients and a brute-force
concordance oracle. These stay deliberately independent of the library code
they check."""
from __future__ import annotations

import numpy as np


def fd_gradient(func, params, step: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of a scalar function over parameter tensors.

    `params` are Parameter objects whose `.data` is perturbed in place and
    restored; `func()` re-evaluates the loss from scratch.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = p.data[idx]
            p.data[idx] = original + step
            up = func()
            p.data[idx] = original - step
            down = func()
            p.data[idx] = original
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    worst = 0.0
    for a, f in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def ci_brute_force(t, l, risk) -> float:
    """O(n^2) concordance: pair (i, j) comparable iff l_i = 1 and t_i < t_j;
    concordant when risk_i > risk_j, prediction ties worth 0.5."""
    t = np.asarray(t, dtype=float)
    l = np.asarray(l)
    risk = np.asarray(risk, dtype=float)
    concordant = 0.0
    comparable = 0
    n = len(t)
    for i in range(n):
        if l[i] != 1:
            continue
        for j in range(n):
            if t[i] < t[j]:
                comparable += 1
                if risk[i] > risk[j]:
                    concordant += 1.0
                elif risk[i] == risk[j]:
                    concordant += 0.5
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return concordant / comparable
