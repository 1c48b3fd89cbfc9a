"""Class 1 tests: category p-values computed as if the local statistics were
an i.i.d. sample, plus the gene-permutation test that induces the same null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import hypergeom, norm, t as t_dist

from . import _rng, _wilcoxon_exact
from .globalstat import (
    AvgDiff,
    FisherCount,
    GlobalStatKind,
    PearsonDiffProp,
    WilcoxonRankSum,
    compute_global,
    tie_group_sizes,
    wilcoxon_iid_moments,
)
from .model import InputError

EXACT_LIMIT = 200  # largest m for the exact rank-sum distribution
ENUMERATION_CAP = 2_000_000  # largest C(m, m_c) for exhaustive gene permutation

_P_FLOOR = 5e-324  # smallest subnormal: keeps p in (0, 1] when sf underflows


def _clip_p(p: float) -> float:
    return min(1.0, max(float(p), _P_FLOOR))


@dataclass(frozen=True)
class Class1Result:
    category: str
    u_obs: float
    p: float
    method: str
    degenerate: bool = False
    aux: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def class1_test(
    t,
    category,
    kind: GlobalStatKind,
    name: str = "",
    exact_limit: int = EXACT_LIMIT,
    continuity: bool = False,
) -> Class1Result:
    """One-sided upper p-value for the category under the i.i.d. null.

    Fisher counts get the exact hypergeometric tail; proportion and average
    differences get Z/t tails; rank sums get the exact distribution up to
    `exact_limit` genes (ties force the normal approximation, which carries
    the midrank tie-variance correction).
    """
    res = compute_global(t, category, kind)
    m, m_c = res.m, res.m_c

    if isinstance(kind, FisherCount):
        r = res.aux["R"]
        if r == 0:
            return Class1Result(name, res.value, 1.0, "FisherExact", degenerate=True,
                                aux=res.aux, warnings=res.warnings)
        p = _clip_p(hypergeom.sf(res.value - 1, m, m_c, r))
        return Class1Result(name, res.value, p, "FisherExact", aux=res.aux,
                            warnings=res.warnings)

    if isinstance(kind, PearsonDiffProp):
        if res.degenerate:
            return Class1Result(name, res.value, 1.0, "PearsonZ", degenerate=True,
                                aux=res.aux, warnings=res.warnings)
        p = _clip_p(norm.sf(res.value))
        return Class1Result(name, res.value, p, "PearsonZ", aux=res.aux,
                            warnings=res.warnings)

    if isinstance(kind, AvgDiff):
        if res.degenerate:
            return Class1Result(name, res.value, 1.0, "AvgDiffT", degenerate=True, aux=res.aux)
        p = _clip_p(t_dist.sf(res.value, df=m - 2))
        return Class1Result(name, res.value, p, "AvgDiffT", aux=res.aux)

    if isinstance(kind, WilcoxonRankSum):
        v = np.abs(np.asarray(t, float)) if kind.absolute else np.asarray(t, float)
        ties = tie_group_sizes(v)
        if m <= exact_limit and ties.size == 0:
            p = _wilcoxon_exact.upper_tail_p(res.value, m, m_c)
            return Class1Result(name, res.value, p, "WilcoxonExact", aux=res.aux)
        mean, var = wilcoxon_iid_moments(m, m_c, ties)
        if var == 0:
            return Class1Result(name, res.value, 1.0, "WilcoxonNormal",
                                degenerate=True, aux=res.aux)
        cc = 0.5 if continuity else 0.0
        z = (res.value - cc - mean) / math.sqrt(var)
        return Class1Result(name, res.value, _clip_p(norm.sf(z)), "WilcoxonNormal", aux=res.aux)

    raise InputError(f"unknown global statistic kind {kind!r}")


def gene_permutation_test(
    t,
    category,
    kind: GlobalStatKind,
    B: int = 1000,
    seed: int = 0,
    name: str = "",
    exhaustive: bool = False,
    enumeration_cap: int = ENUMERATION_CAP,
) -> Class1Result:
    """Resample category membership uniformly over size-m_c gene subsets.

    Monte Carlo mode draws B independent subsets from the (seed, category, b)
    streams and reports (1 + #{u* >= u_obs}) / (B + 1). Exhaustive mode
    enumerates all C(m, m_c) subsets and reports the exact tail fraction,
    which reproduces the exact Fisher / rank-sum tests.
    """
    t = np.asarray(t, dtype=np.float64)
    m = t.size
    idx = np.asarray(category, dtype=np.intp)
    m_c = idx.size
    obs = compute_global(t, idx, kind)

    if exhaustive:
        n_subsets = math.comb(m, m_c)
        if n_subsets > enumeration_cap:
            raise InputError(
                f"exhaustive gene permutation needs C({m},{m_c}) = {n_subsets} "
                f"evaluations, above the cap of {enumeration_cap}"
            )
        hits = 0
        for subset in combinations(range(m), m_c):
            u = compute_global(t, np.array(subset, dtype=np.intp), kind).value
            if u >= obs.value:
                hits += 1
        p = hits / n_subsets
        return Class1Result(name, obs.value, p, f"GenePermutation(exhaustive={n_subsets})",
                            aux=obs.aux, warnings=obs.warnings)

    if B < 1:
        raise InputError("B must be >= 1")
    count = 0
    for b in range(B):
        gen = _rng.stream(seed, "gene-perm", name, b)
        subset = gen.choice(m, size=m_c, replace=False)
        u = compute_global(t, subset, kind).value
        if u >= obs.value:
            count += 1
    p = (1.0 + count) / (B + 1.0)
    return Class1Result(name, obs.value, p, f"GenePermutation(B={B})",
                        aux=obs.aux, warnings=obs.warnings)
