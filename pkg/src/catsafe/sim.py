"""Simulation harness: synthetic correlated expression, response
randomization, DE injection, and the calibration / power / correlation-map
campaigns.

Scenarios
---------
class1 null   : fixed expression, balanced random two-group response per
                replicate, no DE anywhere. Class 1 tests are expected to be
                anti-conservative whenever categories carry correlation;
                array permutation is calibrated by construction.
class3 null   : same randomization plus a stratified DE profile with equal
                strata proportions inside and outside every tested category.
                Array permutation turns conservative here; bootstrap pivot
                tests should hold their level.
power         : class3 profile plus an additive or multiplicative bump to
                the category genes, swept over a grid.
corr-map      : pairs of correlated genes under several designs, mapping
                expression correlation into local-statistic correlation.

Replicates are the parallel unit; every random draw comes from a stream
keyed by (seed, purpose, replicate[, resample]), so reports do not depend on
evaluation order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import hypergeom, norm, t as t_dist

from . import _rng
from ._batch import (
    TwoGroupBatch,
    batched_globals,
    bootstrap_weights,
    category_matrix,
    label_weights,
    permutation_weights,
)
from .cox import fit_univariate
from .globalstat import (
    AvgDiff,
    FisherCount,
    GlobalStatKind,
    PearsonDiffProp,
    WilcoxonRankSum,
)
from .local import PooledT
from .model import (
    CategoryCollection,
    CategoryEntry,
    DegenerateGeneError,
    ExpressionMatrix,
    InputError,
    ResamplingError,
    Response,
    UpperTail,
)
from .multiplicity import fwer_estimate
from .resample import null_center_theta0

# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticDesign:
    """Block-equicorrelated Gaussian expression.

    Genes are grouped into blocks with a common within-block correlation;
    genes in different blocks (and genes outside any block) share cross_rho.
    The implied correlation matrix must be positive semi-definite, which the
    factor construction guarantees for 0 <= cross_rho <= min(block rho) < 1;
    other settings fall back to a dense Cholesky with an eigenvalue check.
    """

    m: int
    n: int
    n1: int
    n2: int
    blocks: tuple[tuple[int, float], ...] = ()
    cross_rho: float = 0.0
    gene_variances: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise InputError("design needs m >= 2 genes and n >= 2 arrays")
        if self.n1 + self.n2 != self.n or self.n1 < 1 or self.n2 < 1:
            raise InputError("group sizes must be positive and sum to n")
        if sum(s for s, _ in self.blocks) > self.m:
            raise InputError("blocks cover more genes than the design has")
        for s, r in self.blocks:
            if s < 1 or not -1.0 < r < 1.0:
                raise InputError(f"bad block ({s}, {r})")
        if self.gene_variances is not None and len(self.gene_variances) != self.m:
            raise InputError("gene_variances length must equal m")

    def block_of(self) -> np.ndarray:
        """Per-gene block index; unblocked genes get singleton blocks."""
        out = np.empty(self.m, dtype=np.intp)
        pos = 0
        bid = 0
        for size, _ in self.blocks:
            out[pos : pos + size] = bid
            pos += size
            bid += 1
        for i in range(pos, self.m):
            out[i] = bid
            bid += 1
        return out

    def block_rhos(self) -> np.ndarray:
        rhos = [r for _, r in self.blocks]
        n_single = self.m - sum(s for s, _ in self.blocks)
        return np.array(rhos + [self.cross_rho] * n_single, dtype=np.float64)


def synth_matrix(design: SyntheticDesign, seed: int) -> ExpressionMatrix:
    """Draw n i.i.d. array columns from the design's Gaussian model."""
    gen = _rng.stream(seed, "synth")
    m, n = design.m, design.n
    g = design.cross_rho
    rho = design.block_rhos()
    block = design.block_of()
    if 0.0 <= g <= 1.0 and np.all(rho >= g) and np.all(rho < 1.0):
        shared = gen.standard_normal(n)
        bfac = gen.standard_normal((rho.size, n))
        eps = gen.standard_normal((m, n))
        rho_g = rho[block][:, None]
        X = (
            math.sqrt(g) * shared[None, :]
            + np.sqrt(rho_g - g) * bfac[block]
            + np.sqrt(1.0 - rho_g) * eps
        )
    else:
        if m > 4000:
            raise InputError("dense covariance path is limited to m <= 4000 genes")
        corr = np.full((m, m), g)
        for b in range(rho.size):
            sel = block == b
            corr[np.ix_(sel, sel)] = rho[b]
        np.fill_diagonal(corr, 1.0)
        eig_min = float(np.linalg.eigvalsh(corr).min())
        if eig_min < -1e-10:
            raise InputError(f"design correlation matrix is not PSD (min eig {eig_min:.3e})")
        L = np.linalg.cholesky(corr + np.eye(m) * max(0.0, -eig_min + 1e-12))
        X = L @ gen.standard_normal((m, n))
    if design.gene_variances is not None:
        X = X * np.sqrt(np.asarray(design.gene_variances))[:, None]
    gene_ids = tuple(f"g{i:05d}" for i in range(m))
    array_ids = tuple(f"a{j:04d}" for j in range(n))
    return ExpressionMatrix(gene_ids, array_ids, X)


def randomize_response(n: int, seed: int) -> Response:
    """Uniformly random balanced two-group labeling of n arrays."""
    if n % 2:
        raise InputError("balanced randomization needs an even number of arrays")
    return Response.two_group(_balanced_labels(_rng.stream(seed, "response"), n))


def _balanced_labels(gen: np.random.Generator, n: int) -> np.ndarray:
    labels = np.repeat(np.array([1, 2]), n // 2)
    return labels[gen.permutation(n)]


def inject_de(matrix: ExpressionMatrix, response: Response, genes, d: float) -> ExpressionMatrix:
    """Standardize the selected rows to unit sample variance, then add
    d*sqrt(1/n1 + 1/n2) to their group-1 columns.

    The resulting pooled-t noncentrality for those genes is approximately d.
    """
    if response.labels is None:
        raise InputError("DE injection needs a two-group response")
    sizes = response.group_sizes()
    n1, n2 = sizes.get(1, 0), sizes.get(2, 0)
    idx = np.asarray(genes, dtype=np.intp)
    X = matrix.values.copy()
    sd = X[idx].std(axis=1, ddof=1)
    if np.any(sd == 0):
        bad = [matrix.gene_ids[i] for i in idx[sd == 0][:5]]
        raise DegenerateGeneError(f"cannot standardize zero-variance rows: {bad}", bad)
    X[idx] = X[idx] / sd[:, None]
    shift = d * math.sqrt(1.0 / n1 + 1.0 / n2)
    cols = response.labels == 1
    X[np.ix_(idx, cols)] += shift
    return ExpressionMatrix(matrix.gene_ids, matrix.array_ids, X)


# ---------------------------------------------------------------------------
# stratified null profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrataSpec:
    """K distributional strata given by association parameters (deltas) and
    proportions; proportions must be achievable exactly inside every tested
    category and in the leftover complement."""

    deltas: tuple[float, ...]
    proportions: tuple[float, ...]

    def __post_init__(self):
        if len(self.deltas) != len(self.proportions) or not self.deltas:
            raise InputError("deltas and proportions must be equal-length, nonempty")
        if any(b <= 0 for b in self.proportions):
            raise InputError("strata proportions must be positive")
        if abs(sum(self.proportions) - 1.0) > 1e-9:
            raise InputError("strata proportions must sum to 1")

    @property
    def K(self) -> int:
        return len(self.deltas)


def _quota_counts(size: int, proportions) -> list[int]:
    counts = []
    for b in proportions:
        q = b * size
        # 1e-6 absorbs decimal approximations of rational proportions
        if abs(q - round(q)) > 1e-6:
            raise InputError(
                f"stratum proportion {b} times group size {size} is not an integer; "
                "choose category sizes compatible with the proportions"
            )
        counts.append(int(round(q)))
    return counts


def _quota_cycle(indices: np.ndarray, counts: list[int], out: np.ndarray) -> None:
    # round-robin by largest remaining quota: interleaves strata deterministically
    remaining = np.array(counts, dtype=np.int64)
    for g in indices:
        k = int(np.argmax(remaining))
        out[g] = k
        remaining[k] -= 1


def assign_strata(spec: StrataSpec, collection: CategoryCollection, m: int) -> np.ndarray:
    """Per-gene stratum labels with exact proportions inside every category
    and in the leftover genes; requires nonoverlapping categories."""
    if collection.overlapping():
        raise InputError("stratified null profiles require nonoverlapping categories")
    out = np.full(m, -1, dtype=np.intp)
    covered = np.zeros(m, dtype=bool)
    for e in collection:
        counts = _quota_counts(e.size, spec.proportions)
        _quota_cycle(e.member_indices, counts, out)
        covered[e.member_indices] = True
    rest = np.flatnonzero(~covered)
    if rest.size:
        counts = _quota_counts(int(rest.size), spec.proportions)
        _quota_cycle(rest, counts, out)
    return out


def delta_vector(spec: StrataSpec, assignment: np.ndarray) -> np.ndarray:
    return np.asarray(spec.deltas, dtype=np.float64)[assignment]


# ---------------------------------------------------------------------------
# category constructors for synthetic studies
# ---------------------------------------------------------------------------


def contiguous_categories(m: int, sizes, count: int, stride: int | None = None) -> CategoryCollection:
    """`count` categories of cycled `sizes` over contiguous index ranges.

    Block-aligned starts make the categories inherit the design's block
    correlation. Ranges wrap modulo m, so categories may overlap once the
    gene space is exhausted.
    """
    sizes = list(sizes)
    entries = []
    start = 0
    for k in range(count):
        size = sizes[k % len(sizes)]
        idx = (start + np.arange(size)) % m
        entries.append(CategoryEntry(f"cat{k:04d}", f"synthetic size {size}", idx))
        start = (start + (stride if stride is not None else size)) % m
    return CategoryCollection(tuple(entries), m)


def disjoint_categories(m: int, sizes) -> CategoryCollection:
    """Nonoverlapping contiguous categories packed from gene 0."""
    entries = []
    start = 0
    for k, size in enumerate(sizes):
        if start + size > m:
            raise InputError(f"{sum(sizes)} category genes do not fit in m={m}")
        entries.append(
            CategoryEntry(f"cat{k:04d}", f"synthetic size {size}", start + np.arange(size))
        )
        start += size
    return CategoryCollection(tuple(entries), m)


# ---------------------------------------------------------------------------
# study configuration and report
# ---------------------------------------------------------------------------

METHODS = ("class1", "array-perm", "boot-q", "boot-t")
STATS = ("fisher", "pearson", "avgdiff", "wilcoxon")


@dataclass(frozen=True)
class TestSpec:
    method: str
    stat: str
    kind: GlobalStatKind

    @property
    def name(self) -> str:
        return f"{self.method}-{self.stat}"


def parse_test_name(name: str, region: UpperTail) -> TestSpec:
    for method in METHODS:
        if name.startswith(method + "-"):
            stat = name[len(method) + 1 :]
            if stat not in STATS:
                raise InputError(f"unknown global statistic {stat!r} in test {name!r}")
            kind: GlobalStatKind
            if stat == "fisher":
                kind = FisherCount(region)
            elif stat == "pearson":
                kind = PearsonDiffProp(region)
            elif stat == "avgdiff":
                kind = AvgDiff()
            else:
                kind = WilcoxonRankSum()
            if method in ("boot-q", "boot-t") and stat == "fisher":
                raise InputError(
                    "bootstrap pivot tests need a fixed null center; the Fisher "
                    "count has none (its expectation depends on the per-gene "
                    "distributions)"
                )
            return TestSpec(method, stat, kind)
    raise InputError(f"unknown test name {name!r} (methods: {', '.join(METHODS)})")


@dataclass(frozen=True)
class CalibrationConfig:
    scenario: str  # "class1" or "class3"
    tests: tuple[str, ...]
    nrep: int = 500
    B: int = 500
    alphas: tuple[float, ...] = (0.1, 0.05, 0.01, 0.005, 0.001)
    seed: int = 0
    strata: StrataSpec | None = None
    region_threshold: float | None = None  # default: t_{n-2, 0.95}
    fwer_alpha: float = 0.05

    def __post_init__(self):
        if self.scenario not in ("class1", "class3"):
            raise InputError(f"unknown calibration scenario {self.scenario!r}")
        if self.scenario == "class3" and self.strata is None:
            raise InputError("class3 scenario requires a StrataSpec")
        if self.nrep < 1 or self.B < 1:
            raise InputError("nrep and B must be >= 1")
        if any(t.startswith("boot-q") for t in self.tests):
            need = math.ceil(1.0 / min(self.alphas))
            if self.B < need:
                raise InputError(
                    f"quantile bootstrap at alpha={min(self.alphas)} needs B >= {need}, "
                    f"got {self.B}"
                )


@dataclass(frozen=True)
class PowerConfig:
    strata: StrataSpec
    grid: tuple[float, ...]
    tests: tuple[str, ...]
    alternative: str = "additive"  # or "multiplicative"
    alpha: float = 0.05
    nrep: int = 300
    B: int = 200
    seed: int = 0
    region_threshold: float | None = None

    def __post_init__(self):
        if self.alternative not in ("additive", "multiplicative"):
            raise InputError(f"unknown alternative {self.alternative!r}")
        if not self.grid:
            raise InputError("empty alternative grid")


@dataclass(frozen=True)
class CorrMapConfig:
    designs: tuple[str, ...] = ("pooled-t", "log-fold", "anova-f", "cox-wald")
    rho_grid: tuple[float, ...] = (-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9)
    n: int = 40
    n_pairs: int = 100
    n_sim: int = 200
    variance_ratio: float = 1.0  # heteroscedasticity knob: var of gene 2 / gene 1
    seed: int = 0

    def __post_init__(self):
        known = {"pooled-t", "log-fold", "anova-f", "cox-wald"}
        bad = set(self.designs) - known
        if bad:
            raise InputError(f"unknown corr-map designs: {sorted(bad)}")
        if self.n % 4:
            raise InputError("corr-map needs n divisible by 4 (four-group design)")


@dataclass
class StudyReport:
    scenario: str
    config: dict
    ratio_rows: list[dict] = field(default_factory=list)
    ecdf: dict[str, np.ndarray] = field(default_factory=dict)  # test -> (2, K) [p, F(p)]
    fwer: dict[str, float] = field(default_factory=dict)
    min_p: dict[str, float] = field(default_factory=dict)
    power_rows: list[dict] = field(default_factory=list)
    corr_rows: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    pooled_p: dict[str, np.ndarray] = field(default_factory=dict)  # test -> (nrep, L)


# ---------------------------------------------------------------------------
# calibration engine
# ---------------------------------------------------------------------------


def _default_region(n: int, threshold: float | None) -> UpperTail:
    if threshold is None:
        threshold = float(t_dist.ppf(0.95, df=n - 2))
    return UpperTail(threshold)


def _class1_pvalues(u: np.ndarray, spec: TestSpec, m: int, sizes: np.ndarray,
                    R: np.ndarray | None) -> np.ndarray:
    """Closed-form Class 1 p-values for a (L,) vector of observed globals."""
    if spec.stat == "wilcoxon":
        mean = sizes * (m + 1) / 2.0
        var = sizes * (m - sizes) * (m + 1) / 12.0
        p = norm.sf((u - mean) / np.sqrt(var))
    elif spec.stat == "avgdiff":
        p = t_dist.sf(u, df=m - 2)
    elif spec.stat == "pearson":
        p = norm.sf(u)
    else:  # fisher: exact hypergeometric tail, R varies by replicate
        p = hypergeom.sf(u - 1, m, sizes, R)
    return np.maximum(p, 5e-324)  # keep p in (0, 1] even when sf underflows


def _draw_permutations(gen: np.random.Generator, B: int, n: int) -> np.ndarray:
    return np.vstack([gen.permutation(n) for _ in range(B)])


def _draw_bootstrap(gen: np.random.Generator, B: int, labels: np.ndarray,
                    redraw_limit: int) -> np.ndarray:
    n = labels.size
    out = np.empty((B, n), dtype=np.intp)
    redraws = 0
    for b in range(B):
        while True:
            idx = gen.integers(0, n, size=n)
            lab = labels[idx]
            if (lab == 1).sum() >= 2 and (lab == 2).sum() >= 2:
                out[b] = idx
                break
            redraws += 1
            if redraws > redraw_limit:
                raise ResamplingError("bootstrap redraw limit exhausted in study")
    return out


def run_calibration_study(
    matrix: ExpressionMatrix,
    collection: CategoryCollection,
    config: CalibrationConfig,
) -> StudyReport:
    """Pooled Type I error of the configured tests under the chosen null.

    Per replicate: randomize the balanced response, apply the stratified DE
    profile (class3 only), test every category with every configured test,
    and pool the p-values. Resampling tests share each draw across
    categories within the replicate.
    """
    m, n = matrix.m, matrix.n
    if n % 2:
        raise InputError("calibration studies need an even number of arrays")
    region = _default_region(n, config.region_threshold)
    specs = [parse_test_name(t, region) for t in config.tests]
    L = len(collection)
    sizes = np.array([e.size for e in collection], dtype=np.float64)
    cmat = category_matrix(collection)

    X = matrix.values
    shift_base = None
    if config.scenario == "class3":
        assignment = assign_strata(config.strata, collection, m)
        delta = delta_vector(config.strata, assignment)
        inj = delta != 0.0
        X = X.copy()
        sd = X[inj].std(axis=1, ddof=1)
        if np.any(sd == 0):
            raise DegenerateGeneError("zero-variance rows cannot carry DE", [])
        X[inj] = X[inj] / sd[:, None]
        n1 = n // 2
        shift_base = delta * math.sqrt(1.0 / n1 + 1.0 / (n - n1))
    batch = TwoGroupBatch(X)

    theta0 = {
        s.name: np.array(
            [null_center_theta0(s.kind, m, e.size) for e in collection], dtype=np.float64
        )
        for s in specs
        if s.method in ("boot-q", "boot-t")
    }
    pooled = {s.name: np.empty((config.nrep, L)) for s in specs}

    for r in range(config.nrep):
        y = _balanced_labels(_rng.stream(config.seed, "response", r), n)
        z = (y == 1).astype(np.float64)
        w1, w2 = label_weights(y)
        T_obs = batch.stats(w1, w2, PooledT(), shift=shift_base, shift_cols=z)
        need_perm = any(s.method == "array-perm" for s in specs)
        need_boot = any(s.method in ("boot-q", "boot-t") for s in specs)
        u_obs = {}
        for s in specs:
            u_obs[s.name] = batched_globals(T_obs, cmat, sizes, s.kind)[:, 0]

        Tp = None
        if need_perm:
            perms = _draw_permutations(_rng.stream(config.seed, "perm", r), config.B, n)
            pw1, pw2 = permutation_weights(y, perms)
            Tp = batch.stats(pw1, pw2, PooledT(), shift=shift_base, shift_cols=z)
        Tb = None
        if need_boot:
            draws = _draw_bootstrap(
                _rng.stream(config.seed, "boot", r), config.B, y, 100 * config.B
            )
            bw1, bw2 = bootstrap_weights(y, draws)
            Tb = batch.stats(bw1, bw2, PooledT(), shift=shift_base, shift_cols=z)

        for s in specs:
            if s.method == "class1":
                R = None
                if s.stat == "fisher":
                    R = np.full(L, float(rejected_count(T_obs[:, 0], region)))
                pooled[s.name][r] = _class1_pvalues(u_obs[s.name], s, m, sizes, R)
            elif s.method == "array-perm":
                U = batched_globals(Tp, cmat, sizes, s.kind)
                count = (U >= u_obs[s.name][:, None]).sum(axis=1)
                pooled[s.name][r] = (1.0 + count) / (config.B + 1.0)
            elif s.method == "boot-q":
                U = batched_globals(Tb, cmat, sizes, s.kind)
                count = (U <= theta0[s.name][:, None]).sum(axis=1)
                pooled[s.name][r] = (1.0 + count) / (config.B + 1.0)
            else:  # boot-t
                U = batched_globals(Tb, cmat, sizes, s.kind)
                ubar = U.mean(axis=1)
                se = U.std(axis=1, ddof=1)
                stat = np.where(se > 0, (ubar - theta0[s.name]) / np.where(se > 0, se, 1.0), 0.0)
                p = np.maximum(t_dist.sf(stat, df=n - 1), 5e-324)
                pooled[s.name][r] = np.where(se > 0, p, 1.0)

    report = StudyReport(config.scenario, _config_dict(config))
    grid = np.unique(np.concatenate([np.logspace(-4, 0, 61), np.asarray(config.alphas)]))
    for s in specs:
        P = pooled[s.name]
        flat = P.ravel()
        report.pooled_p[s.name] = P
        report.min_p[s.name] = float(flat.min())
        report.fwer[s.name] = fwer_estimate(P, config.fwer_alpha)
        report.ecdf[s.name] = np.vstack([grid, [(flat <= g).mean() for g in grid]])
        for a in config.alphas:
            realized = float((flat <= a).mean())
            report.ratio_rows.append(
                {
                    "test": s.name,
                    "alpha": a,
                    "n_pooled": flat.size,
                    "realized": realized,
                    "ratio": realized / a,
                }
            )
        if s.method == "boot-q":
            a_min = min(config.alphas)
            realized = float((flat <= a_min).mean())
            if realized / a_min > 1.2:
                report.flags.append(
                    f"{s.name}: anti-conservative at alpha={a_min} "
                    f"(ratio {realized / a_min:.2f})"
                )
    return report


def rejected_count(t: np.ndarray, region: UpperTail) -> int:
    return int((t > region.threshold).sum())


def _config_dict(cfg) -> dict:
    out = {}
    for k, v in vars(cfg).items():
        if isinstance(v, StrataSpec):
            out["strata_deltas"] = list(v.deltas)
            out["strata_proportions"] = list(v.proportions)
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# power engine
# ---------------------------------------------------------------------------


def run_power_study(
    matrix: ExpressionMatrix,
    collection: CategoryCollection,
    config: PowerConfig,
) -> StudyReport:
    """Rejection rates along the alternative grid for each configured test.

    The alternative adds (or multiplies) the constant into the stratified
    profile of every tested category while the complement keeps the null
    profile; at c = 0 (additive) or c = 1 (multiplicative) the power column
    is exactly the Type I error.
    """
    m, n = matrix.m, matrix.n
    if n % 2:
        raise InputError("power studies need an even number of arrays")
    region = _default_region(n, config.region_threshold)
    specs = [parse_test_name(t, region) for t in config.tests]
    L = len(collection)
    sizes = np.array([e.size for e in collection], dtype=np.float64)
    cmat = category_matrix(collection)
    assignment = assign_strata(config.strata, collection, m)
    delta0 = delta_vector(config.strata, assignment)
    in_category = np.zeros(m, dtype=bool)
    for e in collection:
        in_category[e.member_indices] = True

    # standardize every row that can ever carry DE under some grid point
    X = matrix.values.copy()
    may_shift = in_category | (delta0 != 0)
    sd = X[may_shift].std(axis=1, ddof=1)
    if np.any(sd == 0):
        raise DegenerateGeneError("zero-variance rows cannot carry DE", [])
    X[may_shift] = X[may_shift] / sd[:, None]
    batch = TwoGroupBatch(X)
    n1 = n // 2
    se_scale = math.sqrt(1.0 / n1 + 1.0 / (n - n1))

    theta0 = {
        s.name: np.array(
            [null_center_theta0(s.kind, m, e.size) for e in collection], dtype=np.float64
        )
        for s in specs
        if s.method in ("boot-q", "boot-t")
    }

    report = StudyReport("power", _config_dict(config))
    for gi, c in enumerate(config.grid):
        delta = delta0.copy()
        if config.alternative == "additive":
            delta[in_category] = delta0[in_category] + c
        else:
            delta[in_category] = delta0[in_category] * c
        shift = delta * se_scale
        reject = {s.name: np.empty((config.nrep, L), dtype=bool) for s in specs}
        for r in range(config.nrep):
            y = _balanced_labels(_rng.stream(config.seed, "response", gi, r), n)
            z = (y == 1).astype(np.float64)
            w1, w2 = label_weights(y)
            T_obs = batch.stats(w1, w2, PooledT(), shift=shift, shift_cols=z)
            Tp = Tb = None
            if any(s.method == "array-perm" for s in specs):
                perms = _draw_permutations(
                    _rng.stream(config.seed, "perm", gi, r), config.B, n
                )
                pw1, pw2 = permutation_weights(y, perms)
                Tp = batch.stats(pw1, pw2, PooledT(), shift=shift, shift_cols=z)
            if any(s.method in ("boot-q", "boot-t") for s in specs):
                draws = _draw_bootstrap(
                    _rng.stream(config.seed, "boot", gi, r), config.B, y, 100 * config.B
                )
                bw1, bw2 = bootstrap_weights(y, draws)
                Tb = batch.stats(bw1, bw2, PooledT(), shift=shift, shift_cols=z)
            for s in specs:
                u_obs = batched_globals(T_obs, cmat, sizes, s.kind)[:, 0]
                if s.method == "class1":
                    R = None
                    if s.stat == "fisher":
                        R = np.full(L, float(rejected_count(T_obs[:, 0], region)))
                    p = _class1_pvalues(u_obs, s, m, sizes, R)
                elif s.method == "array-perm":
                    U = batched_globals(Tp, cmat, sizes, s.kind)
                    p = (1.0 + (U >= u_obs[:, None]).sum(axis=1)) / (config.B + 1.0)
                elif s.method == "boot-q":
                    U = batched_globals(Tb, cmat, sizes, s.kind)
                    p = (1.0 + (U <= theta0[s.name][:, None]).sum(axis=1)) / (config.B + 1.0)
                else:
                    U = batched_globals(Tb, cmat, sizes, s.kind)
                    ubar = U.mean(axis=1)
                    se = U.std(axis=1, ddof=1)
                    stat = np.where(se > 0, (ubar - theta0[s.name]) / np.where(se > 0, se, 1.0), 0.0)
                    p = np.where(se > 0, t_dist.sf(stat, df=n - 1), 1.0)
                reject[s.name][r] = p <= config.alpha
        for s in specs:
            per_rep = reject[s.name].mean(axis=1)
            power = float(per_rep.mean())
            se_power = float(per_rep.std(ddof=1) / math.sqrt(config.nrep)) if config.nrep > 1 else 0.0
            report.power_rows.append(
                {"test": s.name, "c": float(c), "power": power, "mc_se": se_power}
            )
    return report


# ---------------------------------------------------------------------------
# correlation-map engine
# ---------------------------------------------------------------------------


def run_corrmap_study(config: CorrMapConfig) -> StudyReport:
    """Map expression correlation to local-statistic correlation.

    For each grid correlation and design: draw pairs of correlated Gaussian
    genes over independent simulated datasets, compute the local statistics,
    and summarize the per-pair sample correlation of the two statistics.
    """
    report = StudyReport("corr-map", _config_dict(config))
    n = config.n
    for design in config.designs:
        for rho in config.rho_grid:
            gen = _rng.stream(config.seed, "corrmap", design, int(round(rho * 1000)))
            t1, t2 = _corrmap_stats(gen, design, rho, config)
            r = _rowwise_corr(t1, t2)
            report.corr_rows.append(
                {
                    "design": design,
                    "rho_x": float(rho),
                    "median_rho_t": float(np.median(r)),
                    "q05_rho_t": float(np.quantile(r, 0.05)),
                    "q95_rho_t": float(np.quantile(r, 0.95)),
                    "mean_rho_t": float(np.mean(r)),
                }
            )
    return report


def _corrmap_stats(gen, design, rho, config: CorrMapConfig):
    """(pairs, n_sim) local statistics for both genes of each pair."""
    n, pairs, nsim = config.n, config.n_pairs, config.n_sim
    z1 = gen.standard_normal((nsim, pairs, n))
    z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * gen.standard_normal((nsim, pairs, n))
    if config.variance_ratio != 1.0:
        z2 = z2 * math.sqrt(config.variance_ratio)
    if design in ("pooled-t", "log-fold"):
        labels = np.repeat(np.array([1, 2]), n // 2)
        t1 = _tg_stat(z1, labels, design)
        t2 = _tg_stat(z2, labels, design)
    elif design == "anova-f":
        labels = np.repeat(np.array([1, 2, 3, 4]), n // 4)
        t1 = _anova_stat(z1, labels)
        t2 = _anova_stat(z2, labels)
    else:  # cox-wald
        t1 = np.empty((pairs, nsim))
        t2 = np.empty((pairs, nsim))
        for s in range(nsim):
            ev_t = gen.exponential(1.0, size=n)
            cs_t = gen.exponential(1.0, size=n)
            times = np.minimum(ev_t, cs_t)
            events = (ev_t <= cs_t).astype(np.int64)
            if events.sum() == 0:
                events[np.argmin(times)] = 1
            fit = fit_univariate(np.vstack([z1[s], z2[s]]), times, events)
            t1[:, s] = fit.wald[:pairs]
            t2[:, s] = fit.wald[pairs:]
    return t1, t2


def _tg_stat(Z, labels, design):
    g1 = labels == 1
    g2 = labels == 2
    n1, n2 = int(g1.sum()), int(g2.sum())
    diff = Z[:, :, g1].mean(axis=2) - Z[:, :, g2].mean(axis=2)
    if design == "log-fold":
        return diff.T
    v1 = Z[:, :, g1].var(axis=2, ddof=1)
    v2 = Z[:, :, g2].var(axis=2, ddof=1)
    sp = np.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2))
    return (diff / (sp * math.sqrt(1.0 / n1 + 1.0 / n2))).T


def _anova_stat(Z, labels):
    uniq = np.unique(labels)
    k = uniq.size
    n = labels.size
    grand = Z.mean(axis=2)
    ssb = np.zeros(Z.shape[:2])
    ssw = np.zeros(Z.shape[:2])
    for g in uniq:
        cols = labels == g
        ng = int(cols.sum())
        mg = Z[:, :, cols].mean(axis=2)
        ssb += ng * (mg - grand) ** 2
        ssw += Z[:, :, cols].var(axis=2, ddof=0) * ng
    return ((ssb / (k - 1)) / (ssw / (n - k))).T


def _rowwise_corr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    num = (a * b).sum(axis=1)
    den = np.sqrt((a * a).sum(axis=1) * (b * b).sum(axis=1))
    return num / den
