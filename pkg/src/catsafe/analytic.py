"""Closed-form machinery: correlation summaries, the variance-inflation
factor of the average-difference statistic, the bivariate normal CDF, the
rank-sum variance under correlated Gaussian local statistics, and the
extremum scan backing the covariance-term inequality.

The rank-sum variance is a verification tool: its cost grows as the square
of (category size x complement size), so it is guarded for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .model import InputError

_GL_NODES = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_NODES)
_TERM_GUARD = 1_000  # refuse (m_c*m_cbar)^2 > _TERM_GUARD^2 quadruple terms


@dataclass(frozen=True)
class CorrelationSummary:
    rho_c: float | None  # None when m_c < 2
    rho_cbar: float | None
    rho_cross: float
    m_c: int
    m_cbar: int


def _validate_corr(corr: np.ndarray) -> np.ndarray:
    corr = np.asarray(corr, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise InputError("correlation matrix must be square")
    if not np.allclose(corr, corr.T, atol=1e-10):
        raise InputError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-10):
        raise InputError("correlation matrix must have unit diagonal")
    return corr


def correlation_summary(
    category,
    corr: np.ndarray | None = None,
    matrix=None,
) -> CorrelationSummary:
    """Average pairwise correlations within the category, within the
    complement, and across the cut.

    Pass either a correlation matrix or an ExpressionMatrix (sample
    correlations across arrays are computed from its rows).
    """
    if (corr is None) == (matrix is None):
        raise InputError("provide exactly one of corr or matrix")
    if corr is None:
        corr = np.corrcoef(matrix.values)
    corr = _validate_corr(corr)
    m = corr.shape[0]
    idx = np.asarray(category, dtype=np.intp)
    mask = np.zeros(m, dtype=bool)
    mask[idx] = True
    m_c = int(mask.sum())
    m_cb = m - m_c
    if m_c < 1 or m_cb < 1:
        raise InputError("category and complement must both be nonempty")

    def _mean_offdiag(sub: np.ndarray) -> float | None:
        k = sub.shape[0]
        if k < 2:
            return None
        return float((sub.sum() - np.trace(sub)) / (k * (k - 1)))

    rho_c = _mean_offdiag(corr[np.ix_(mask, mask)])
    rho_cb = _mean_offdiag(corr[np.ix_(~mask, ~mask)])
    rho_x = float(corr[np.ix_(mask, ~mask)].mean())
    return CorrelationSummary(rho_c, rho_cb, rho_x, m_c, m_cb)


def var_inflation_avgdiff(summary: CorrelationSummary) -> tuple[float, float]:
    """(exact, approximate) ratio of Var[mean_C - mean_Cbar] to its value
    under independence.

    exact = 1 + (m_cbar*(m_c-1)/m) rho_c + (m_c*(m_cbar-1)/m) rho_cbar
              - (2*m_c*m_cbar/m) rho_cross
    The cross term carries the factor 2 from -2*Cov of the two means; the
    Monte Carlo tests pin this form. approx = 1 + (m_c-1)*rho_c, the
    large-complement shorthand.
    """
    m_c, m_cb = summary.m_c, summary.m_cbar
    m = m_c + m_cb
    rho_c = summary.rho_c if summary.rho_c is not None else 0.0
    rho_cb = summary.rho_cbar if summary.rho_cbar is not None else 0.0
    exact = (
        1.0
        + (m_cb * (m_c - 1) / m) * rho_c
        + (m_c * (m_cb - 1) / m) * rho_cb
        - (2.0 * m_c * m_cb / m) * summary.rho_cross
    )
    approx = 1.0 + (m_c - 1) * rho_c
    return float(exact), float(approx)


def bvn_cdf(x, y, rho):
    """P(Z1 <= x, Z2 <= y) for standard bivariate normal correlation rho.

    Gauss-Legendre quadrature of the single-integral reduction (the
    derivative of the CDF in rho is the density), with the arcsine
    substitution removing the endpoint singularity; absolute error is well
    below 1e-10 for |rho| < 1. Accepts arrays broadcast against each other.
    """
    x, y, rho = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64),
        np.asarray(y, dtype=np.float64),
        np.asarray(rho, dtype=np.float64),
    )
    if np.any(np.abs(rho) >= 1.0):
        raise InputError("bvn_cdf requires |rho| < 1")
    out = _bvn_raw(x, y, rho)
    return float(out) if out.ndim == 0 else out


def _bvn_raw(x, y, rho):
    a = np.arcsin(rho)[..., None]
    theta = 0.5 * a * (_GL_X + 1.0)
    sin_t = np.sin(theta)
    cos2_t = np.cos(theta) ** 2
    xe = x[..., None]
    ye = y[..., None]
    integrand = np.exp(-(xe * xe - 2.0 * xe * ye * sin_t + ye * ye) / (2.0 * cos2_t))
    tail = 0.5 * np.squeeze(a, -1) * (integrand @ _GL_W) / (2.0 * np.pi)
    return np.clip(norm.cdf(x) * norm.cdf(y) + tail, 0.0, 1.0)


def _bvn_cov_term(x, y, rho):
    """Phi2(x, y; rho) - Phi(x) Phi(y), tolerating rho = +/-1 (degenerate
    limits Phi(min(x,y)) and max(0, Phi(x)+Phi(y)-1))."""
    x, y, rho = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64),
        np.asarray(y, dtype=np.float64),
        np.asarray(rho, dtype=np.float64),
    )
    rho_c = np.clip(rho, -1.0, 1.0)
    inner = np.clip(rho_c, -0.9999999999, 0.9999999999)
    base = _bvn_raw(x, y, inner)
    px, py = norm.cdf(x), norm.cdf(y)
    hi = rho_c >= 1.0 - 1e-14
    lo = rho_c <= -1.0 + 1e-14
    base = np.where(hi, norm.cdf(np.minimum(x, y)), base)
    base = np.where(lo, np.maximum(0.0, px + py - 1.0), base)
    return base - px * py


def wilcoxon_var_correlated(delta, corr, category, force: bool = False) -> float:
    """Variance of the category rank sum for multivariate-normal local
    statistics with means `delta`, unit variances, and correlations `corr`.

    Sums, over all pairs of (category gene, complement gene) comparisons, the
    covariance of the two exceedance indicators. Each covariance is a
    bivariate-normal orthant term whose correlation combines four pairwise
    correlations; the indicator means standardize the mean differences by the
    pairwise difference SDs. With all deltas equal the terms reduce to
    arcsin/2pi of the combined correlation, and with all correlations zero
    the total collapses to the familiar m_c*m_cbar*(m+1)/12.
    """
    corr = _validate_corr(corr)
    delta = np.asarray(delta, dtype=np.float64)
    m = corr.shape[0]
    if delta.size != m:
        raise InputError("delta length must match the correlation matrix")
    mask = np.zeros(m, dtype=bool)
    mask[np.asarray(category, dtype=np.intp)] = True
    ci = np.flatnonzero(mask)
    hi = np.flatnonzero(~mask)
    n_pairs = ci.size * hi.size
    if n_pairs == 0:
        raise InputError("category and complement must both be nonempty")
    if n_pairs > _TERM_GUARD and not force:
        raise InputError(
            f"{n_pairs}^2 covariance terms exceed the guard "
            f"({_TERM_GUARD}^2); pass force=True to override"
        )

    # flatten (i in C, h not in C) comparisons
    I = np.repeat(ci, hi.size)
    H = np.tile(hi, ci.size)
    v = 2.0 - 2.0 * corr[I, H]
    if np.any(v <= 0):
        raise InputError("perfectly correlated pair across the category cut")
    sd = np.sqrt(v)
    z = (delta[I] - delta[H]) / sd

    total = 0.0
    chunk = max(1, int(2e6) // max(1, n_pairs))
    for s in range(0, n_pairs, chunk):
        e = min(n_pairs, s + chunk)
        num = (
            corr[np.ix_(I[s:e], I)]
            + corr[np.ix_(H[s:e], H)]
            - corr[np.ix_(I[s:e], H)]
            - corr[np.ix_(H[s:e], I)]
        )
        rho_pair = num / np.outer(sd[s:e], sd)
        total += float(_bvn_cov_term(z[s:e, None], z[None, :], rho_pair).sum())
    return total


def wilcoxon_iid_variance(m: int, m_c: int) -> float:
    return m_c * (m - m_c) * (m + 1) / 12.0


@dataclass(frozen=True)
class LemmaScan:
    rho: float
    extremum_xy: tuple[float, float]
    extremum_value: float
    f_origin: float
    is_maximum: bool


def lemma_b2_scan(rho: float, lo: float = -4.0, hi: float = 4.0, step: float = 0.05) -> LemmaScan:
    """Scan f(x, y) = Phi2(x, y; rho) - Phi(x) Phi(y) on a square grid.

    For rho > 0 the global maximum sits at the origin, for rho < 0 the global
    minimum does, and f vanishes identically at rho = 0; f(0,0) equals
    arcsin(rho)/(2 pi).
    """
    if not -1.0 < rho < 1.0:
        raise InputError("lemma scan requires |rho| < 1")
    n = int(round((hi - lo) / step)) + 1
    g = lo + step * np.arange(n)
    g[np.abs(g) < step * 1e-9] = 0.0
    X, Y = np.meshgrid(g, g, indexing="ij")
    F = _bvn_cov_term(X, Y, np.full_like(X, rho))
    flat = np.argmax(F) if rho >= 0 else np.argmin(F)
    i, j = np.unravel_index(flat, F.shape)
    f0 = float(_bvn_cov_term(0.0, 0.0, rho))
    return LemmaScan(
        rho=rho,
        extremum_xy=(float(g[i]), float(g[j])),
        extremum_value=float(F[i, j]),
        f_origin=f0,
        is_maximum=rho >= 0,
    )


def is_correlation_dominant(corr: np.ndarray, category) -> bool:
    """Exact all-pairs check of correlation dominance: every within-category
    and within-complement correlation at least matches every cross-cut one."""
    corr = _validate_corr(corr)
    m = corr.shape[0]
    mask = np.zeros(m, dtype=bool)
    mask[np.asarray(category, dtype=np.intp)] = True
    cc = corr[np.ix_(mask, mask)]
    bb = corr[np.ix_(~mask, ~mask)]
    cross = corr[np.ix_(mask, ~mask)]
    max_cross = float(cross.max())

    def _min_offdiag(sub):
        k = sub.shape[0]
        if k < 2:
            return np.inf
        off = sub[~np.eye(k, dtype=bool)]
        return float(off.min())

    return _min_offdiag(cc) >= max_cross and _min_offdiag(bb) >= max_cross


@dataclass(frozen=True)
class DominanceCheck:
    var_equal: float
    strata_vars: dict[float, float]
    margin: float  # var_equal - max(strata_vars); > 0 confirms the maximum

    @property
    def passed(self) -> bool:
        return self.margin > 1e-9


def variance_dominance_check(
    m: int = 12,
    m_c: int = 4,
    rho_within: float = 0.4,
    rho_cross: float = 0.0,
    d_values=(0.5, 1.0, 2.0),
) -> DominanceCheck:
    """Compare the rank-sum variance at equal means against two-strata mean
    profiles on a correlation-dominant structure.

    Half of the category and half of the complement sit at mean d (the rest
    at 0), keeping strata proportions matched; the equal-mean configuration
    must dominate every tested d.
    """
    if m_c % 2 or (m - m_c) % 2:
        raise InputError("category and complement sizes must be even for the 2-strata split")
    corr = np.full((m, m), rho_cross)
    corr[:m_c, :m_c] = rho_within
    corr[m_c:, m_c:] = rho_within
    np.fill_diagonal(corr, 1.0)
    cat = np.arange(m_c)
    if not is_correlation_dominant(corr, cat):
        raise InputError("constructed structure is not correlation dominant")
    var_equal = wilcoxon_var_correlated(np.zeros(m), corr, cat)
    strata_vars: dict[float, float] = {}
    for d in d_values:
        delta = np.zeros(m)
        delta[: m_c // 2] = d  # half the category
        delta[m_c : m_c + (m - m_c) // 2] = d  # half the complement
        strata_vars[float(d)] = wilcoxon_var_correlated(delta, corr, cat)
    margin = var_equal - max(strata_vars.values())
    return DominanceCheck(var_equal, strata_vars, margin)
