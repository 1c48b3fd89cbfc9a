"""Univariate Cox proportional-hazards scoring.

All genes share one (times, events) response, so the Newton iterations run
vectorized across genes: risk-set sums are reverse cumulative sums over the
time-sorted arrays, with ties handled by the Breslow convention (every event
at a tied time sees the full risk set at that time).

Monotone partial likelihoods (perfectly separating covariates) have no finite
maximizer; the solver is box-constrained to [-BETA_BOUND, BETA_BOUND] and
flags coefficients that land on the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConvergenceError

BETA_BOUND = 10.0
MAX_ITER = 50
TOL = 1e-8


@dataclass(frozen=True)
class CoxFit:
    beta: np.ndarray  # (m,)
    se: np.ndarray  # (m,), inf where information vanishes
    wald: np.ndarray  # (m,), beta/se with 0 where se is inf
    at_bound: np.ndarray  # (m,) bool, True where |beta| hit the box constraint
    iterations: int


def _risk_start(times_sorted: np.ndarray) -> np.ndarray:
    """For each sorted position, the first index of its tied-time block."""
    n = times_sorted.size
    start = np.zeros(n, dtype=np.intp)
    for j in range(1, n):
        start[j] = start[j - 1] if times_sorted[j] == times_sorted[j - 1] else j
    return start


def breslow_loglik(beta, x: np.ndarray, times: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Breslow partial log-likelihood, vectorized over a beta grid.

    `beta` may be a scalar or 1-d grid; `x` is one covariate vector.
    Used directly by the grid-search oracle in the test suite.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    order = np.argsort(times, kind="stable")
    xs = np.asarray(x, dtype=np.float64)[order]
    ev = np.asarray(events)[order].astype(bool)
    start = _risk_start(np.asarray(times, dtype=np.float64)[order])
    eta = beta[:, None] * xs[None, :]  # (G, n)
    # log of reverse cumulative sums of exp(eta), stabilized per grid point
    mx = eta.max(axis=1, keepdims=True)
    rc = np.cumsum(np.exp(eta - mx)[:, ::-1], axis=1)[:, ::-1]
    log_s0 = mx + np.log(rc)
    idx = np.flatnonzero(ev)
    return eta[:, idx].sum(axis=1) - log_s0[:, start[idx]].sum(axis=1)


def fit_univariate(
    x_rows: np.ndarray,
    times: np.ndarray,
    events: np.ndarray,
    beta_bound: float = BETA_BOUND,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
) -> CoxFit:
    """Fit one Cox model per row of `x_rows` against the shared response.

    Newton-Raphson from beta=0 with step halving; |delta| < tol declares
    convergence. Raises ConvergenceError only if some gene neither converges
    nor reaches the boundary within max_iter.
    """
    X = np.atleast_2d(np.asarray(x_rows, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.int64)
    m, n = X.shape
    order = np.argsort(times, kind="stable")
    Xs = X[:, order]
    ev = events[order].astype(bool)
    start = _risk_start(times[order])
    ev_idx = np.flatnonzero(ev)
    risk_of_event = start[ev_idx]

    beta = np.zeros(m)
    active = np.ones(m, dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if not active.any():
            break
        ll_a, grad, info = _score_info(beta[active], Xs[active], ev_idx, risk_of_event)
        # genes with no usable curvature (e.g. constant covariate): leave at 0
        flat = info <= 1e-12
        step = np.where(flat, 0.0, grad / np.where(flat, 1.0, info))
        new_beta = np.clip(beta[active] + step, -beta_bound, beta_bound)
        delta = new_beta - beta[active]
        # step halving where the likelihood decreased
        for _ in range(30):
            ll_new = _score_info(new_beta, Xs[active], ev_idx, risk_of_event)[0]
            worse = ll_new < ll_a - 1e-12
            if not worse.any():
                break
            delta = np.where(worse, delta / 2.0, delta)
            new_beta = beta[active] + delta
        done = np.abs(delta) < tol
        done |= flat
        beta_active = new_beta
        b = beta.copy()
        b[active] = beta_active
        beta = b
        still = active.copy()
        still[active] = ~done
        active = still
    if active.any():
        raise ConvergenceError(
            f"Cox fit did not converge for {int(active.sum())} gene(s) "
            f"after {max_iter} iterations"
        )

    _, _, info = _score_info(beta, Xs, ev_idx, risk_of_event)
    se = np.where(info > 1e-12, 1.0 / np.sqrt(np.where(info > 1e-12, info, 1.0)), np.inf)
    wald = np.where(np.isfinite(se), beta / np.where(np.isfinite(se), se, 1.0), 0.0)
    at_bound = np.abs(beta) >= beta_bound - 1e-12
    return CoxFit(beta=beta, se=se, wald=wald, at_bound=at_bound, iterations=iterations)


def _score_info(beta, Xs, ev_idx, risk_of_event):
    """(loglik, gradient, information) per gene at the given betas.

    Xs is time-sorted (m, n); risk sums are reverse cumsums indexed at each
    event's tie-block start.
    """
    eta = beta[:, None] * Xs
    mx = eta.max(axis=1, keepdims=True)
    E = np.exp(eta - mx)
    XE = Xs * E
    X2E = Xs * XE
    S0 = np.cumsum(E[:, ::-1], axis=1)[:, ::-1]
    S1 = np.cumsum(XE[:, ::-1], axis=1)[:, ::-1]
    S2 = np.cumsum(X2E[:, ::-1], axis=1)[:, ::-1]
    s0 = S0[:, risk_of_event]
    r1 = S1[:, risk_of_event] / s0
    r2 = S2[:, risk_of_event] / s0
    ll = eta[:, ev_idx].sum(axis=1) - (np.log(s0) + mx).sum(axis=1)
    grad = (Xs[:, ev_idx] - r1).sum(axis=1)
    info = (r2 - r1 * r1).sum(axis=1)
    return ll, grad, info
