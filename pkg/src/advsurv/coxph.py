"""Linear Cox proportional hazards baseline.

Fits regression coefficients by Newton ascent on the partial log-likelihood,
with Efron's correction inside tied event times (Breslow available as the
no-ties fast path). The model produces risk scores x.beta only; it does not
predict event times.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CoxModel:
    beta: np.ndarray
    penalty: float
    converged: bool
    n_iter: int
    grad_max_norm: float
    log_likelihood: float
    ties: str = "efron"

    def risk_score(self, x) -> np.ndarray | float:
        """Linear predictor x.beta; larger means higher hazard."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.beta.shape[0]:
            raise ValueError(
                f"expected {self.beta.shape[0]} features, got {x.shape[-1]}"
            )
        return x @ self.beta


def _grouped(t: np.ndarray, l: np.ndarray):
    """Unique observed times in decreasing order with their member indices."""
    order = np.argsort(-t, kind="stable")
    times = t[order]
    boundaries = np.flatnonzero(np.diff(times) != 0) + 1
    groups = np.split(order, boundaries)
    return groups


def partial_log_likelihood(
    beta: np.ndarray,
    X: np.ndarray,
    t: np.ndarray,
    l: np.ndarray,
    ties: str = "efron",
    hessian: bool = False,
):
    """Value and analytic gradient of the Cox partial log-likelihood.

    Iterates unique times from largest to smallest, growing the risk-set
    sums incrementally. With `ties="efron"` the denominator for the r-th of
    d tied events is S0 - (r/d) * s0, where s0 sums over the tied events
    themselves; `ties="breslow"` uses the full risk set for every tied event.
    The linear predictor is max-shifted before exponentiation; the shift
    cancels exactly in the likelihood.
    """
    if ties not in ("efron", "breslow"):
        raise ValueError(f"ties must be 'efron' or 'breslow', got {ties!r}")
    beta = np.asarray(beta, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    l = np.asarray(l)
    if not np.any(l == 1):
        raise ValueError("partial likelihood undefined without events")
    p = X.shape[1]
    eta = X @ beta
    shift = eta.max()
    w = np.exp(eta - shift)
    wX = w[:, None] * X

    loglik = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p)) if hessian else None
    S0 = 0.0
    S1 = np.zeros(p)
    S2 = np.zeros((p, p)) if hessian else None

    for members in _grouped(t, l):
        S0 += w[members].sum()
        S1 += wX[members].sum(axis=0)
        if hessian:
            S2 += (wX[members].T @ X[members])
        events = members[l[members] == 1]
        d = events.size
        if d == 0:
            continue
        s0 = w[events].sum()
        s1 = wX[events].sum(axis=0)
        s2 = (wX[events].T @ X[events]) if hessian else None
        loglik += (eta[events] - shift).sum()
        grad += X[events].sum(axis=0)
        fractions = np.arange(d) / d if ties == "efron" else np.zeros(d)
        for r in fractions:
            denom = S0 - r * s0
            num = S1 - r * s1
            loglik -= np.log(denom)
            grad -= num / denom
            if hessian:
                hess -= (S2 - r * s2) / denom - np.outer(num, num) / denom**2
    if hessian:
        return loglik, grad, hess
    return loglik, grad


def fit(
    dataset,
    penalty: float = 1e-4,
    ties: str = "efron",
    tol: float = 1e-8,
    max_iter: int = 100,
) -> CoxModel:
    """Newton ascent on the L2-penalized partial log-likelihood.

    `dataset` is a SurvivalDataset or an (X, t, l) triple. Convergence is
    gradient max-norm below `tol`; failure to converge or a singular Hessian
    raises with a suggestion to increase the penalty.
    """
    if hasattr(dataset, "X"):
        X, t, l = dataset.X, dataset.t, dataset.l
    else:
        X, t, l = (np.asarray(a) for a in dataset)
    p = X.shape[1]
    beta = np.zeros(p)

    def objective(b):
        ll, g, h = partial_log_likelihood(b, X, t, l, ties=ties, hessian=True)
        ll -= 0.5 * penalty * float(b @ b)
        g = g - penalty * b
        h = h - penalty * np.eye(p)
        return ll, g, h

    ll, grad, hess = objective(beta)
    for iteration in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            return CoxModel(beta, penalty, True, iteration - 1, gnorm, float(ll), ties)
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise RuntimeError(
                "singular Hessian in Cox fit; increase the L2 penalty"
            ) from None
        # damped update: halve until the penalized log-likelihood improves
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            try:
                ll_new, grad_new, hess_new = objective(candidate)
            except FloatingPointError:
                ll_new = -np.inf
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        else:
            raise RuntimeError(
                "Cox fit diverged (no ascent step found); increase the L2 penalty"
            )
        beta, ll, grad, hess = candidate, ll_new, grad_new, hess_new
    gnorm = float(np.max(np.abs(grad)))
    if gnorm >= tol:
        raise RuntimeError(
            f"Cox fit did not converge in {max_iter} iterations "
            f"(gradient max-norm {gnorm:.3e}); increase the L2 penalty"
        )
    return CoxModel(beta, penalty, True, max_iter, gnorm, float(ll), ties)
