"""End-to-end category testing: one (matrix, response, collection) run with a
chosen local statistic, global statistic, and testing method."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .class1 import class1_test, gene_permutation_test
from .globalstat import FisherCount, GlobalStatKind
from .local import LocalStatKind, compute_local, de_scores
from .model import CategoryCollection, ExpressionMatrix, InputError, Response
from .resample import (
    CategoryTestResult,
    Interval,
    Method,
    ResamplingPlan,
    bootstrap_pivot_test,
    build_null,
    empirical_pvalue,
    null_center_theta0,
)

PIPELINE_METHODS = ("class1", "gene-perm", "array-perm", "boot-q", "boot-t")


def test_categories(
    matrix: ExpressionMatrix,
    response: Response,
    collection: CategoryCollection,
    local_kind: LocalStatKind,
    global_kind: GlobalStatKind,
    method: str,
    B: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> list[CategoryTestResult]:
    """Test every category; results come back in collection order.

    Resampling draws are keyed by (seed, category name, resample index), so
    the outcome is independent of `threads` and of which other categories
    are in the collection.
    """
    if method not in PIPELINE_METHODS:
        raise InputError(f"unknown method {method!r} (choose from {PIPELINE_METHODS})")
    if method in ("boot-q", "boot-t") and isinstance(global_kind, FisherCount):
        raise InputError(
            "bootstrap pivot tests need a fixed null center; the Fisher count "
            "has none (its expectation depends on the per-gene distributions)"
        )
    observed = compute_local(matrix, response, local_kind)
    scores = de_scores(observed)

    def one(entry) -> CategoryTestResult:
        if method == "class1":
            r = class1_test(scores, entry.member_indices, global_kind, name=entry.name)
            return CategoryTestResult(
                entry.name, r.u_obs, r.p, r.method, degenerate=r.degenerate,
                diagnostics={"m_c": entry.size, **r.aux},
            )
        if method == "gene-perm":
            r = gene_permutation_test(
                scores, entry.member_indices, global_kind, B=B, seed=seed, name=entry.name
            )
            return CategoryTestResult(
                entry.name, r.u_obs, r.p, r.method, degenerate=r.degenerate,
                diagnostics={"m_c": entry.size, "B": B, **r.aux},
            )
        plan = ResamplingPlan(_resample_method(method), B, seed)
        null = build_null(
            matrix, response, entry.member_indices, local_kind, global_kind, plan,
            label=entry.name,
        )
        if method == "array-perm":
            p = empirical_pvalue(null)
            return CategoryTestResult(
                entry.name, null.u_obs, p, "ArrayPermutation",
                diagnostics={"m_c": entry.size, "B": B, "u_null_mean": float(null.u_star.mean()),
                             "redraws": null.redraw_count},
            )
        theta0 = null_center_theta0(global_kind, matrix.m, entry.size)
        interval = Interval.QUANTILE if method == "boot-q" else Interval.T_INTERVAL
        result = bootstrap_pivot_test(null, theta0, interval, matrix.n, name=entry.name)
        result.diagnostics["m_c"] = entry.size
        return result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, collection.entries))
    return [one(e) for e in collection.entries]


def _resample_method(method: str) -> Method:
    return {
        "array-perm": Method.ARRAY_PERMUTATION,
        "boot-q": Method.BOOTSTRAP_QUANTILE,
        "boot-t": Method.BOOTSTRAP_T,
    }[method]
