from __future__ import annotations

import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import pdist, squareform

from conftest import toy_table
from iomc.clustering import (
    CountryBlockSeries,
    Dendrogram,
    DissimilarityMatrix,
    aacd,
    country_series,
    cut,
    dissimilarity_matrix,
    hierarchical_cluster,
    select_num_clusters,
    wss_tss_ratio,
    wss_tss_trace,
)
from iomc.errors import CountryLookupError
from iomc.iomodel import extract_block
from iomc.synthetic import planted_group_series


def random_dissimilarity(rng, m, integer=False):
    x = rng.integers(1, 4, size=(m, m)).astype(float) if integer else rng.random((m, m))
    d = np.triu(x, 1)
    return DissimilarityMatrix(tuple(f"c{i}" for i in range(m)), d + d.T)


def brute_force_complete(d):
    """Recompute max-linkage from scratch at every step; same slot tie rule."""
    m = d.shape[0]
    slots = {i: [i] for i in range(m)}
    ids = {i: i for i in range(m)}
    merges = []
    for step in range(m - 1):
        best = None
        for i in sorted(slots):
            for j in sorted(slots):
                if j <= i:
                    continue
                dist = max(d[a, b] for a in slots[i] for b in slots[j])
                if best is None or dist < best[0]:
                    best = (dist, i, j)
        dist, i, j = best
        a, b = sorted((ids[i], ids[j]))
        slots[i] = slots[i] + slots.pop(j)
        merges.append((a, b, dist, len(slots[i])))
        ids[i] = m + step
    return merges


def pearson_loop_aacd(a, b):
    total = 0.0
    for j in range(a.shape[1]):
        try:
            total += abs(statistics.correlation(list(a[:, j]), list(b[:, j])))
        except statistics.StatisticsError:
            pass
    return 1.0 - total / a.shape[1]


def test_aacd_matches_pearson_loop(rng):
    for _ in range(20):
        a, b = rng.normal(size=(15, 7)), rng.normal(size=(15, 7))
        assert abs(aacd(a, b) - pearson_loop_aacd(a, b)) <= 1e-12


def test_aacd_identical_and_constant_columns(rng):
    a = rng.normal(size=(10, 3))
    assert aacd(a, a) == pytest.approx(0.0, abs=1e-12)
    assert aacd(a, -2 * a + 1) == pytest.approx(0.0, abs=1e-12)
    b = a.copy()
    b[:, 1] = 5.0
    assert aacd(a, b) == pytest.approx(1 / 3, abs=1e-12)


def test_aacd_shape_mismatch():
    with pytest.raises(ValueError):
        aacd(np.ones((3, 2)), np.ones((3, 3)))


@given(st.integers(0, 10_000))
def test_aacd_range_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
    v = aacd(a, b)
    assert 0.0 <= v <= 1.0
    assert v == aacd(b, a)


def test_country_series_stacks_years():
    tabs = [toy_table(2011, seed=1), toy_table(2010, seed=2)]
    s_in = country_series(tabs, "AAA", "input")
    assert [s.country for s in s_in] == ["BBB"]
    np.testing.assert_array_equal(
        s_in[0].columns, np.vstack([extract_block(tabs[1], "AAA", "BBB"),
                                    extract_block(tabs[0], "AAA", "BBB")]))
    s_out = country_series(tabs, "AAA", "output")
    np.testing.assert_array_equal(s_out[0].columns[:2], extract_block(tabs[1], "BBB", "AAA"))
    with pytest.raises(CountryLookupError):
        country_series(tabs, "ZZZ", "input")


def test_dissimilarity_matrix_validation():
    with pytest.raises(ValueError):
        DissimilarityMatrix(("a", "b"), [[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        DissimilarityMatrix(("a", "b"), [[0, -1], [-1, 0]])
    with pytest.raises(ValueError):
        DissimilarityMatrix(("a", "b"), [[1, 1], [1, 0]])


def test_dissimilarity_counts_degenerate_columns(rng):
    a = rng.normal(size=(5, 3))
    b = a.copy()
    b[:, 0] = 1.0
    d = dissimilarity_matrix([CountryBlockSeries("A", a), CountryBlockSeries("B", b)])
    assert d.degenerate[0, 1] == 1


@pytest.mark.parametrize("integer", [False, True])
def test_complete_linkage_matches_brute_force(rng, integer):
    for _ in range(100):
        m = int(rng.integers(2, 11))
        d = random_dissimilarity(rng, m, integer)
        dendro = hierarchical_cluster(d, "complete")
        got = [(mg.a, mg.b, mg.height, mg.size) for mg in dendro.merges]
        assert got == brute_force_complete(np.asarray(d.d))


@pytest.mark.parametrize("method", ["complete", "ward"])
def test_matches_scipy(rng, method):
    for _ in range(50):
        pts = rng.normal(size=(int(rng.integers(2, 15)), 3))
        d = DissimilarityMatrix(tuple(map(str, range(len(pts)))), squareform(pdist(pts)))
        ours = hierarchical_cluster(d, method).as_linkage_matrix()
        ref = scipy_linkage(pdist(pts), method=method)
        np.testing.assert_allclose(ours, ref, rtol=1e-10, atol=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 12))
def test_complete_heights_monotone(seed, m):
    d = random_dissimilarity(np.random.default_rng(seed), m)
    assert np.all(np.diff(hierarchical_cluster(d).heights) >= 0)


@given(st.integers(0, 10_000), st.integers(2, 10))
def test_cuts_are_nested(seed, m):
    d = random_dissimilarity(np.random.default_rng(seed), m)
    dendro = hierarchical_cluster(d)
    prev = None
    for k in range(1, m + 1):
        a = cut(dendro, k)
        assert a.k == k
        if prev is not None:
            for members in a.groups().values():
                assert prev.same_cluster(members)
        prev = a


def test_cut_bounds():
    d = random_dissimilarity(np.random.default_rng(0), 4)
    with pytest.raises(ValueError):
        cut(hierarchical_cluster(d), 0)


def test_dendrogram_text_roundtrip(rng):
    d = random_dissimilarity(rng, 7)
    dendro = hierarchical_cluster(d, "ward")
    assert Dendrogram.from_text(dendro.to_text()) == dendro


def test_wss_tss_matches_centroid_oracle(rng):
    pts = rng.normal(size=(9, 2))
    d = DissimilarityMatrix(tuple(map(str, range(9))), squareform(pdist(pts)))
    dendro = hierarchical_cluster(d)
    tss = np.sum((pts - pts.mean(axis=0)) ** 2)
    for k in range(1, 10):
        wss = 0.0
        for members in cut(dendro, k).groups().values():
            p = pts[[int(c) for c in members]]
            wss += np.sum((p - p.mean(axis=0)) ** 2)
        assert wss_tss_ratio(d, dendro, k) == pytest.approx(wss / tss, rel=1e-10, abs=1e-12)


def test_wss_tss_trace_endpoints(rng):
    d = random_dissimilarity(rng, 6)
    trace = wss_tss_trace(d, hierarchical_cluster(d))
    assert trace[0] == (1, 1.0) and trace[-1] == (6, 0.0)


def test_select_three_planted_groups():
    # Moderate within-group spread: with perfectly tight groups the 0.5 cutoff
    # sits exactly on the boundary between 2 and 3 clusters.
    series = planted_group_series((4, 4, 4), noise=0.5, seed=7)
    d = dissimilarity_matrix(series)
    dendro = hierarchical_cluster(d)
    k = select_num_clusters(d, dendro)
    assert k == 3
    groups = cut(dendro, 3).groups().values()
    assert sorted(sorted(g) for g in groups) == [
        [f"G{g}C{i}" for i in range(1, 5)] for g in (1, 2, 3)]


def test_select_all_zero_is_one():
    d = DissimilarityMatrix(("a", "b", "c"), np.zeros((3, 3)))
    assert select_num_clusters(d, hierarchical_cluster(d)) == 1


@pytest.mark.parametrize("cutoff", [0.0, 1.0, -0.2])
def test_select_rejects_bad_cutoff(cutoff):
    d = random_dissimilarity(np.random.default_rng(0), 3)
    with pytest.raises(ValueError):
        select_num_clusters(d, hierarchical_cluster(d), cutoff)


@pytest.mark.parametrize("g", [3, 4, 5])
def test_tight_equal_groups_select_one_fewer(g):
    # g equal, perfectly separated groups: WSS/TSS is 1/(g-1) at k = g-1,
    # so the default cutoff stops there (exactly at the boundary for g = 3).
    labels = [f"G{i}C{j}" for i in range(g) for j in range(4)]
    grp = np.repeat(np.arange(g), 4)
    d = DissimilarityMatrix(labels, (grp[:, None] != grp[None, :]).astype(float))
    dendro = hierarchical_cluster(d)
    assert wss_tss_ratio(d, dendro, g - 1) == pytest.approx(1 / (g - 1))
    assert wss_tss_ratio(d, dendro, g) == 0.0
    assert select_num_clusters(d, dendro) == (g if g == 3 else g - 1)
    assert select_num_clusters(d, dendro, cutoff=0.1) == g


def test_hand_computed_three_points():
    d = DissimilarityMatrix(("p1", "p2", "p3"), [[0, 1, 5], [1, 0, 5], [5, 5, 0]])
    dendro = hierarchical_cluster(d)
    assert [(m.a, m.b, m.height) for m in dendro.merges] == [(0, 1, 1.0), (2, 3, 5.0)]
    assert cut(dendro, 2).labels == {"p1": 1, "p2": 1, "p3": 2}
    assert cut(dendro, 1).k == 1 and cut(dendro, 3).k == 3


def test_two_planted_groups_within_below_between():
    series = planted_group_series((2, 2), rows=60, cols=5, seed=3)
    d = dissimilarity_matrix(series).d
    within = [d[0, 1], d[2, 3]]
    between = [d[0, 2], d[0, 3], d[1, 2], d[1, 3]]
    assert max(within) < min(between)


@given(st.integers(0, 10_000), st.floats(0.1, 100), st.floats(-100, 100))
def test_aacd_affine_invariance(seed, scale, shift):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(12, 4)), rng.normal(size=(12, 4))
    c = b.copy()
    col = int(rng.integers(4))
    c[:, col] = scale * c[:, col] + shift
    assert aacd(a, c) == pytest.approx(aacd(a, b), abs=1e-9)
