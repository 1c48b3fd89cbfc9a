"""The batched study engine must agree with the per-draw loop path."""

import numpy as np
import pytest

from catsafe._batch import (
    TwoGroupBatch,
    batched_globals,
    bootstrap_weights,
    category_matrix,
    label_weights,
    permutation_weights,
)
from catsafe.globalstat import (
    AvgDiff,
    FisherCount,
    PearsonDiffProp,
    WilcoxonRankSum,
    compute_global,
)
from catsafe.local import LogFoldChange, PooledT, SamT, local_values
from catsafe.model import Response, TopR, UpperTail
from catsafe.sim import SyntheticDesign, disjoint_categories, inject_de, randomize_response, synth_matrix


@pytest.fixture(scope="module")
def dataset():
    design = SyntheticDesign(m=25, n=10, n1=5, n2=5, blocks=((5, 0.4),) * 3, cross_rho=0.1)
    mat = synth_matrix(design, seed=2)
    resp = randomize_response(10, seed=9)
    return mat, resp


def test_observed_stats_match_local_values(dataset):
    mat, resp = dataset
    batch = TwoGroupBatch(mat.values)
    w1, w2 = label_weights(resp.labels)
    for kind in (PooledT(), LogFoldChange(), SamT(0.2)):
        tb = batch.stats(w1, w2, kind)[:, 0]
        tl = local_values(mat.values, resp, kind)
        assert np.allclose(tb, tl, atol=1e-12)


def test_shift_path_equals_inject_de(dataset):
    mat, resp = dataset
    genes = np.array([0, 1, 2, 7, 8])
    injected = inject_de(mat, resp, genes, d=2.0)
    t_direct = local_values(injected.values, resp, PooledT())

    X = mat.values.copy()
    sd = X[genes].std(axis=1, ddof=1)
    X[genes] = X[genes] / sd[:, None]
    batch = TwoGroupBatch(X)
    shift = np.zeros(mat.m)
    shift[genes] = 2.0 * np.sqrt(1 / 5 + 1 / 5)
    z = (resp.labels == 1).astype(float)
    w1, w2 = label_weights(resp.labels)
    t_shift = batch.stats(w1, w2, PooledT(), shift=shift, shift_cols=z)[:, 0]
    assert np.allclose(t_direct, t_shift, atol=1e-10)


def test_permutation_batch_matches_loop_with_injection(dataset):
    mat, resp = dataset
    genes = np.array([0, 1, 2, 7, 8])
    injected = inject_de(mat, resp, genes, d=2.0)
    X = mat.values.copy()
    sd = X[genes].std(axis=1, ddof=1)
    X[genes] = X[genes] / sd[:, None]
    batch = TwoGroupBatch(X)
    shift = np.zeros(mat.m)
    shift[genes] = 2.0 * np.sqrt(1 / 5 + 1 / 5)
    z = (resp.labels == 1).astype(float)

    perms = np.vstack([np.random.default_rng(i).permutation(10) for i in range(12)])
    w1, w2 = permutation_weights(resp.labels, perms)
    T = batch.stats(w1, w2, PooledT(), shift=shift, shift_cols=z)
    for b in range(12):
        permuted = Response.two_group(resp.labels[perms[b]])
        tl = local_values(injected.values, permuted, PooledT())
        assert np.allclose(T[:, b], tl, atol=1e-10)


def test_bootstrap_batch_matches_loop(dataset):
    mat, resp = dataset
    y = resp.labels
    rng = np.random.default_rng(55)
    draws = []
    while len(draws) < 10:
        d = rng.integers(0, 10, 10)
        if (y[d] == 1).sum() >= 2 and (y[d] == 2).sum() >= 2:
            draws.append(d)
    draws = np.vstack(draws)
    batch = TwoGroupBatch(mat.values)
    w1, w2 = bootstrap_weights(y, draws)
    T = batch.stats(w1, w2, PooledT())
    for b, d in enumerate(draws):
        resampled = Response.two_group(y[d])
        tl = local_values(mat.values[:, d], resampled, PooledT())
        assert np.allclose(T[:, b], tl, atol=1e-9)


def test_batched_globals_match_scalar_path(dataset):
    mat, _ = dataset
    coll = disjoint_categories(mat.m, [5, 7, 4])
    cmat = category_matrix(coll)
    sizes = np.array([e.size for e in coll], dtype=float)
    T = np.random.default_rng(5).standard_normal((mat.m, 6))
    kinds = (
        WilcoxonRankSum(),
        AvgDiff(),
        FisherCount(UpperTail(0.8)),
        PearsonDiffProp(UpperTail(0.8)),
        FisherCount(TopR(6)),
    )
    for kind in kinds:
        U = batched_globals(T, cmat, sizes, kind)
        for li, entry in enumerate(coll):
            for b in range(6):
                u = compute_global(T[:, b], entry.member_indices, kind).value
                assert U[li, b] == pytest.approx(u, abs=1e-10), (kind, li, b)
