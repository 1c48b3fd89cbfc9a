"""Category-level statistics comparing a category to its complement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .model import InputError, RejectionRegion, TopR, rejected_mask


@dataclass(frozen=True)
class FisherCount:
    """Number of category genes inside the rejection region."""

    region: RejectionRegion


@dataclass(frozen=True)
class PearsonDiffProp:
    """Standardized difference of rejection proportions.

    pooled_se uses the pooled proportion R/m in the denominator (classical
    one-sided test, equivalent to the chi-square of homogeneity); set False
    for the unpooled form.
    """

    region: RejectionRegion
    pooled_se: bool = True


@dataclass(frozen=True)
class AvgDiff:
    """Mean local-statistic difference standardized by the pooled SD."""


@dataclass(frozen=True)
class WilcoxonRankSum:
    """Rank sum of the category's local statistics (midranks on ties).

    absolute=True ranks |t| for two-sided DE.
    """

    absolute: bool = False


GlobalStatKind = FisherCount | PearsonDiffProp | AvgDiff | WilcoxonRankSum


@dataclass(frozen=True)
class GlobalResult:
    value: float
    kind: GlobalStatKind
    m: int
    m_c: int
    aux: dict = field(default_factory=dict)
    degenerate: bool = False
    warnings: tuple[str, ...] = ()

    @property
    def m_cbar(self) -> int:
        return self.m - self.m_c


def _category_mask(m: int, category: np.ndarray) -> np.ndarray:
    idx = np.asarray(category, dtype=np.intp)
    if idx.size == 0:
        raise InputError("empty category")
    if np.unique(idx).size != idx.size:
        raise InputError("category indices must be unique")
    if idx.min() < 0 or idx.max() >= m:
        raise InputError("category indices out of range")
    if idx.size >= m:
        raise InputError("category must leave a nonempty complement")
    mask = np.zeros(m, dtype=bool)
    mask[idx] = True
    return mask


def compute_global(t, category, kind: GlobalStatKind) -> GlobalResult:
    """Evaluate the category statistic on a vector of local statistics.

    `t` is a plain array of DE scores (larger = more DE); callers holding a
    LocalStatVector should pass `de_scores(vec)`.
    """
    t = np.asarray(t, dtype=np.float64)
    m = t.size
    mask = _category_mask(m, category)
    m_c = int(mask.sum())
    m_cb = m - m_c

    if isinstance(kind, (FisherCount, PearsonDiffProp)):
        rej = rejected_mask(t, kind.region)
        r = int(rej.sum())
        u_f = int(rej[mask].sum())
        warnings = ()
        if isinstance(kind.region, TopR):
            warnings = (
                "TopR rejection region is data-dependent; "
                "independence assumptions of categorical tests do not hold",
            )
        if isinstance(kind, FisherCount):
            return GlobalResult(
                float(u_f), kind, m, m_c, aux={"R": r, "U_F": u_f}, warnings=warnings
            )
        pi_c = u_f / m_c
        pi_cb = (r - u_f) / m_cb
        if kind.pooled_se:
            pi = r / m
            se = np.sqrt(pi * (1 - pi) * (1.0 / m_c + 1.0 / m_cb))
        else:
            se = np.sqrt(pi_c * (1 - pi_c) / m_c + pi_cb * (1 - pi_cb) / m_cb)
        aux = {"R": r, "U_F": u_f, "pi_c": pi_c, "pi_cbar": pi_cb, "se": float(se)}
        if se == 0:
            return GlobalResult(0.0, kind, m, m_c, aux=aux, degenerate=True, warnings=warnings)
        return GlobalResult(float((pi_c - pi_cb) / se), kind, m, m_c, aux=aux, warnings=warnings)

    if isinstance(kind, AvgDiff):
        tc = t[mask]
        tcb = t[~mask]
        mu_c = tc.mean()
        mu_cb = tcb.mean()
        ss = ((tc - mu_c) ** 2).sum() + ((tcb - mu_cb) ** 2).sum()
        s_pool = np.sqrt(ss / (m - 2)) if m > 2 else 0.0
        sd = s_pool * np.sqrt(1.0 / m_c + 1.0 / m_cb)
        aux = {"mu_c": float(mu_c), "mu_cbar": float(mu_cb), "sd": float(sd)}
        if sd == 0:
            return GlobalResult(0.0, kind, m, m_c, aux=aux, degenerate=True)
        return GlobalResult(float((mu_c - mu_cb) / sd), kind, m, m_c, aux=aux)

    if isinstance(kind, WilcoxonRankSum):
        v = np.abs(t) if kind.absolute else t
        ranks = rankdata(v, method="average")
        ties = int(m - np.unique(v).size)
        u_w = float(ranks[mask].sum())
        return GlobalResult(u_w, kind, m, m_c, aux={"ties": ties})

    raise InputError(f"unknown global statistic kind {kind!r}")


def wilcoxon_iid_moments(m: int, m_c: int, tie_sizes=()) -> tuple[float, float]:
    """Null mean and variance of the rank sum under i.i.d. sampling.

    Variance uses the midrank tie correction when tie-group sizes are given:
    var = m_c*m_cbar/12 * (m+1 - sum(s^3-s)/(m*(m-1))).
    """
    m_cb = m - m_c
    mean = m_c * (m + 1) / 2.0
    correction = 0.0
    tie_sizes = np.asarray(list(tie_sizes), dtype=np.float64)
    if tie_sizes.size:
        correction = float(((tie_sizes**3 - tie_sizes).sum()) / (m * (m - 1)))
    var = m_c * m_cb / 12.0 * ((m + 1) - correction)
    return mean, var


def tie_group_sizes(t) -> np.ndarray:
    """Sizes of tied-value groups (>= 2) in a local-statistic vector."""
    _, counts = np.unique(np.asarray(t, dtype=np.float64), return_counts=True)
    return counts[counts > 1]
