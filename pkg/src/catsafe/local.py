"""Per-gene measures of differential expression.

Each statistic is a function of one expression row and the response; all are
computed vectorized over genes. Larger values mean more evidence of DE for
the directed statistics; AnovaF is undirected; EmpiricalP vectors are on the
p-value scale (smaller = more DE) and `de_scores` flips them for downstream
category statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import cox as _cox
from .model import (
    DegenerateGeneError,
    ExpressionMatrix,
    InputError,
    Response,
    ResponseKind,
)

_MAX_NAMED_OFFENDERS = 10


@dataclass(frozen=True)
class PooledT:
    pass


@dataclass(frozen=True)
class LogFoldChange:
    """Mean difference on the (log-scale) expression: linear in X, so local
    statistic correlations equal expression correlations exactly."""


@dataclass(frozen=True)
class AnovaF:
    pass


@dataclass(frozen=True)
class SamT:
    """Pooled t with a fudge constant added to the denominator.

    Nonzero s0 makes the statistic depend on expression scale (it is no
    longer determined by the scaled mean difference alone); exposed to
    demonstrate the resulting category-level bias, not for inference.
    """

    s0: float = 0.0

    def __post_init__(self):
        if self.s0 < 0:
            raise InputError("SamT s0 must be nonnegative")


@dataclass(frozen=True)
class CoxWald:
    pass


@dataclass(frozen=True)
class EmpiricalP:
    """Tag for vectors produced by to_empirical_p."""


LocalStatKind = PooledT | LogFoldChange | AnovaF | SamT | CoxWald | EmpiricalP


class Sidedness(Enum):
    UPPER = "upper"
    TWO_SIDED = "two-sided"


@dataclass(frozen=True)
class LocalStatVector:
    values: np.ndarray  # (m,) float64
    kind: LocalStatKind

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise InputError("local statistics must form a vector")
        if not np.all(np.isfinite(v)):
            raise InputError("non-finite local statistic")

    @property
    def m(self) -> int:
        return int(self.values.size)


def de_scores(vec: LocalStatVector) -> np.ndarray:
    """Values oriented so that larger = more differential expression."""
    if isinstance(vec.kind, EmpiricalP):
        return -vec.values
    return vec.values


def _check_compat(kind: LocalStatKind, response: Response) -> None:
    need: tuple[ResponseKind, ...]
    if isinstance(kind, (PooledT, LogFoldChange, SamT)):
        need = (ResponseKind.TWO_GROUP,)
    elif isinstance(kind, AnovaF):
        need = (ResponseKind.TWO_GROUP, ResponseKind.MULTI_GROUP)
    elif isinstance(kind, CoxWald):
        need = (ResponseKind.SURVIVAL,)
    else:
        raise InputError(f"cannot compute local statistics of kind {kind!r}")
    if response.kind not in need:
        raise InputError(
            f"{type(kind).__name__} requires a "
            f"{' or '.join(k.value for k in need)} response, got {response.kind.value}"
        )


def compute_local(
    matrix: ExpressionMatrix, response: Response, kind: LocalStatKind
) -> LocalStatVector:
    """Compute the per-gene statistic vector for the matrix/response pair."""
    if response.n != matrix.n:
        raise InputError(f"response covers {response.n} arrays, matrix has {matrix.n}")
    return LocalStatVector(local_values(matrix.values, response, kind, matrix.gene_ids), kind)


def local_values(X: np.ndarray, response: Response, kind: LocalStatKind, gene_ids=None):
    """Ndarray-level statistic computation (hot path for resampling engines)."""
    _check_compat(kind, response)
    if gene_ids is None:
        gene_ids = [f"gene{i}" for i in range(X.shape[0])]
    if isinstance(kind, (PooledT, LogFoldChange, SamT)):
        return _two_group_stats(X, response.labels, kind, gene_ids)
    if isinstance(kind, AnovaF):
        return _anova_f(X, response.labels, gene_ids)
    fit = _cox.fit_univariate(X, response.times, response.events)
    return fit.wald


def _two_group_stats(X, labels, kind, gene_ids):
    g1 = labels == 1
    g2 = labels == 2
    n1 = int(g1.sum())
    n2 = int(g2.sum())
    diff = X[:, g1].mean(axis=1) - X[:, g2].mean(axis=1)
    if isinstance(kind, LogFoldChange):
        return diff
    if n1 < 2 or n2 < 2:
        raise InputError("pooled-variance statistics need at least 2 arrays per group")
    ss1 = X[:, g1].var(axis=1, ddof=1) * (n1 - 1)
    ss2 = X[:, g2].var(axis=1, ddof=1) * (n2 - 1)
    s_pool = np.sqrt((ss1 + ss2) / (n1 + n2 - 2))
    denom = s_pool * np.sqrt(1.0 / n1 + 1.0 / n2)
    s0 = kind.s0 if isinstance(kind, SamT) else 0.0
    if s0 > 0:
        return diff / (denom + s0)
    zero = denom == 0
    if np.any(zero & (diff != 0)):
        _raise_degenerate(gene_ids, zero & (diff != 0))
    t = np.zeros_like(diff)
    ok = ~zero
    t[ok] = diff[ok] / denom[ok]
    return t


def _anova_f(X, labels, gene_ids):
    uniq = np.unique(labels)
    k = uniq.size
    n = labels.size
    if n - k < 1:
        raise InputError("ANOVA F needs residual degrees of freedom (n > k)")
    grand = X.mean(axis=1)
    ss_between = np.zeros(X.shape[0])
    ss_within = np.zeros(X.shape[0])
    for g in uniq:
        cols = labels == g
        ng = int(cols.sum())
        mg = X[:, cols].mean(axis=1)
        ss_between += ng * (mg - grand) ** 2
        ss_within += X[:, cols].var(axis=1, ddof=0) * ng
    msb = ss_between / (k - 1)
    msw = ss_within / (n - k)
    zero = msw == 0
    if np.any(zero & (msb > 0)):
        _raise_degenerate(gene_ids, zero & (msb > 0))
    f = np.zeros_like(msb)
    ok = ~zero
    f[ok] = msb[ok] / msw[ok]
    return f


def _raise_degenerate(gene_ids, mask):
    offenders = [gene_ids[i] for i in np.flatnonzero(mask)[:_MAX_NAMED_OFFENDERS]]
    total = int(mask.sum())
    listed = ", ".join(offenders) + (", ..." if total > len(offenders) else "")
    raise DegenerateGeneError(
        f"{total} gene(s) have zero within-group variance with a nonzero "
        f"mean difference: {listed}",
        offenders,
    )


def to_empirical_p(
    observed: LocalStatVector,
    resampled: np.ndarray,
    sidedness: Sidedness = Sidedness.UPPER,
) -> LocalStatVector:
    """Per-gene empirical p-values from a (B, m) resampled statistic matrix.

    p_i = (1 + #{b : t*_{i,b} >= t_i}) / (B + 1); ties count against the
    observed value, so p is guaranteed in (0, 1] and super-uniform. The
    result is tagged EmpiricalP; feed `de_scores` output to the category
    statistics so that small p ranks as strong DE.
    """
    R = np.atleast_2d(np.asarray(resampled, dtype=np.float64))
    if R.shape[0] < 1 or R.shape[1] != observed.m:
        raise InputError(f"resampled matrix must be (B, {observed.m}) with B >= 1")
    t = observed.values
    if sidedness is Sidedness.TWO_SIDED:
        t = np.abs(t)
        R = np.abs(R)
    B = R.shape[0]
    count = (R >= t[None, :]).sum(axis=0)
    return LocalStatVector((1.0 + count) / (B + 1.0), EmpiricalP())
