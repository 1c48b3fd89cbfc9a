"""Resampling engines and the bootstrap pivot tests.

Array permutation permutes the response across arrays (expression fixed, so
gene-gene correlation is untouched) and yields an empirical null of "no
association". The bootstrap resamples (column, response) pairs jointly with
replacement and supports confidence-interval pivot tests against the fixed
null center of the chosen global statistic.

Randomness: resample b of a category's null draws from the counter-based
stream (seed, method, category, b), so results are independent of worker
count and of which other categories are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import t as t_dist

from . import _rng
from .globalstat import (
    AvgDiff,
    FisherCount,
    GlobalStatKind,
    PearsonDiffProp,
    WilcoxonRankSum,
    compute_global,
)
from .local import LocalStatKind, local_values
from .model import (
    DegenerateGeneError,
    ExpressionMatrix,
    InputError,
    ResamplingError,
    Response,
    ResponseKind,
)


class Method(Enum):
    ARRAY_PERMUTATION = "array-perm"
    BOOTSTRAP_QUANTILE = "boot-q"
    BOOTSTRAP_T = "boot-t"


class Interval(Enum):
    QUANTILE = "quantile"
    T_INTERVAL = "t-interval"


DEFAULT_B = {
    Method.ARRAY_PERMUTATION: 1000,
    Method.BOOTSTRAP_QUANTILE: 1000,
    Method.BOOTSTRAP_T: 200,
}


@dataclass(frozen=True)
class ResamplingPlan:
    method: Method
    B: int
    seed: int
    redraw_limit: int | None = None  # bootstrap only; defaults to 100*B

    def __post_init__(self):
        if self.B < 1:
            raise InputError("B must be >= 1")
        if self.redraw_limit is None:
            object.__setattr__(self, "redraw_limit", 100 * self.B)

    @property
    def is_bootstrap(self) -> bool:
        return self.method in (Method.BOOTSTRAP_QUANTILE, Method.BOOTSTRAP_T)


@dataclass(frozen=True)
class NullDistribution:
    u_obs: float
    u_star: np.ndarray  # (B,)
    plan: ResamplingPlan
    redraw_count: int = 0

    def __post_init__(self):
        u = np.asarray(self.u_star, dtype=np.float64)
        u.setflags(write=False)
        object.__setattr__(self, "u_star", u)
        if u.size != self.plan.B:
            raise InputError(f"expected {self.plan.B} resampled values, got {u.size}")
        if not np.all(np.isfinite(u)):
            raise InputError("non-finite resampled global statistic")


@dataclass(frozen=True)
class CategoryTestResult:
    category: str
    u_obs: float
    p: float
    method: str
    theta0: float | None = None
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict)


# --- draw primitives (shared by the loop engine and the batched engine) ---


def permutation_draw(seed: int, label: str | int, b: int, n: int) -> np.ndarray:
    return _rng.stream(seed, "array-perm", label, b).permutation(n)


def bootstrap_stream(seed: int, label: str | int, b: int) -> np.random.Generator:
    """The stream resample b draws from; redraws keep consuming it, so the
    accepted draw stays a pure function of (seed, label, b)."""
    return _rng.stream(seed, "bootstrap", label, b)


def _degenerate_draw(response: Response, idx: np.ndarray) -> bool:
    if response.kind is ResponseKind.SURVIVAL:
        return int(response.events[idx].sum()) < 1
    labels = response.labels[idx]
    if response.kind is ResponseKind.TWO_GROUP:
        return int((labels == 1).sum()) < 2 or int((labels == 2).sum()) < 2
    # multi-group: every original group must stay represented
    return np.unique(labels).size < np.unique(response.labels).size


# --- null construction ---


def build_null(
    matrix: ExpressionMatrix,
    response: Response,
    category,
    local_kind: LocalStatKind,
    global_kind: GlobalStatKind,
    plan: ResamplingPlan,
    label: str | int = "",
) -> NullDistribution:
    """Resampled null distribution of the global statistic for one category.

    `label` keys the random streams (use the category name); two categories
    with different labels draw independent resamples.
    """
    X = matrix.values
    t_obs = local_values(X, response, local_kind, matrix.gene_ids)
    u_obs = compute_global(t_obs, category, global_kind).value
    u_star = np.empty(plan.B)
    redraws = 0
    budget = plan.redraw_limit
    n = response.n
    for b in range(plan.B):
        if plan.method is Method.ARRAY_PERMUTATION:
            perm = permutation_draw(plan.seed, label, b, n)
            t_b = local_values(X, response.reordered(perm), local_kind, matrix.gene_ids)
        else:
            gen = bootstrap_stream(plan.seed, label, b)
            while True:
                idx = gen.integers(0, n, size=n)
                if _degenerate_draw(response, idx):
                    redraws = _spend_redraw(redraws, budget)
                    continue
                try:
                    t_b = local_values(
                        X[:, idx], response.reordered(idx), local_kind, matrix.gene_ids
                    )
                    break
                except DegenerateGeneError:
                    # e.g. a group made of copies of one column
                    redraws = _spend_redraw(redraws, budget)
        u_star[b] = compute_global(t_b, category, global_kind).value
    return NullDistribution(u_obs, u_star, plan, redraws)


def _spend_redraw(redraws: int, budget: int) -> int:
    redraws += 1
    if redraws > budget:
        raise ResamplingError(
            "bootstrap redraw limit exhausted: the design cannot be resampled "
            "without losing a group, all events, or all within-group variance"
        )
    return redraws


def empirical_pvalue(null: NullDistribution) -> float:
    """(1 + #{u* >= u_obs}) / (B + 1), one-sided upper."""
    count = int((null.u_star >= null.u_obs).sum())
    return (1.0 + count) / (null.plan.B + 1.0)


def null_center_theta0(global_kind: GlobalStatKind, m: int, m_c: int) -> float | None:
    """The fixed expectation of the global statistic under every stratified
    null with matching category/complement strata proportions.

    The Fisher count has no fixed center (its expectation depends on the
    per-stratum local-statistic distributions), so pivot tests are
    unavailable for it: None is returned.
    """
    if isinstance(global_kind, WilcoxonRankSum):
        return m_c * (m + 1) / 2.0
    if isinstance(global_kind, (AvgDiff, PearsonDiffProp)):
        return 0.0
    if isinstance(global_kind, FisherCount):
        return None
    raise InputError(f"unknown global statistic kind {global_kind!r}")


def bootstrap_pivot_test(
    null: NullDistribution,
    theta0: float,
    interval: Interval,
    n_arrays: int,
    name: str = "",
) -> CategoryTestResult:
    """Smallest alpha at which the one-sided lower confidence bound excludes
    the null center theta0.

    Quantile interval: p = (1 + #{u* <= theta0}) / (B + 1). t-interval:
    p = P(t_{n-1} >= (u_bar* - theta0) / se*), with the bootstrap moment
    estimates of the global statistic.
    """
    if theta0 is None:
        raise InputError("pivot test requires a global statistic with a fixed null center")
    u = null.u_star
    B = null.plan.B
    diag = {"u_null_mean": float(u.mean()), "B": B, "redraws": null.redraw_count}
    if interval is Interval.QUANTILE:
        count = int((u <= theta0).sum())
        p = (1.0 + count) / (B + 1.0)
        return CategoryTestResult(name, null.u_obs, p, "BootstrapQuantile",
                                  theta0=theta0, diagnostics=diag)
    if n_arrays < 2:
        raise InputError("t-interval needs at least 2 arrays")
    se = float(u.std(ddof=1)) if B > 1 else 0.0
    diag["u_null_se"] = se
    if se == 0:
        return CategoryTestResult(name, null.u_obs, 1.0, "BootstrapT", theta0=theta0,
                                  degenerate=True, diagnostics=diag)
    stat = (float(u.mean()) - theta0) / se
    p = min(1.0, max(float(t_dist.sf(stat, df=n_arrays - 1)), 5e-324))
    diag["pivot_stat"] = stat
    return CategoryTestResult(name, null.u_obs, p, "BootstrapT", theta0=theta0,
                              diagnostics=diag)
