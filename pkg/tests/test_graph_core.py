import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcpd.graph_core import (
    AdjacencySnapshot,
    ChangeScenario,
    CusumState,
    GraphonMatrix,
    cusum,
    cusum_coefficients,
    expected_cusum,
    geometric_grid,
    jump_size,
    numerical_rank,
)
from oracles import naive_cusum, random_adjacency


def state_of(mats, ring=False):
    state = CusumState(mats[0].shape[0], ring=ring)
    for k, m in enumerate(mats, start=1):
        state.append(AdjacencySnapshot(m, k))
    return state


# -- snapshot validation --------------------------------------------------


def test_snapshot_accepts_valid_matrix():
    a = AdjacencySnapshot(np.array([[0, 1], [1, 0]]), 1)
    assert a.n == 2
    assert a.entries.dtype == np.uint8
    assert not a.entries.flags.writeable


@pytest.mark.parametrize(
    "entries",
    [
        np.array([[0, 1], [0, 0]]),
        np.array([[1, 0], [0, 0]]),
        np.array([[0, 2], [2, 0]]),
        np.zeros((2, 3)),
    ],
    ids=["asymmetric", "self-loop", "non-binary", "non-square"],
)
def test_snapshot_rejects_invalid(entries):
    with pytest.raises(ValueError):
        AdjacencySnapshot(entries, 1)


def test_graphon_rejects_out_of_range():
    with pytest.raises(ValueError):
        GraphonMatrix(np.array([[0.0, 1.5], [1.5, 0.0]]))


def test_append_checks_time_index_and_size():
    state = CusumState(3)
    with pytest.raises(ValueError):
        state.append(AdjacencySnapshot(np.zeros((3, 3)), 2))
    with pytest.raises(ValueError):
        state.append(AdjacencySnapshot(np.zeros((2, 2)), 1))


# -- CUSUM ----------------------------------------------------------------


def test_cusum_matches_weighted_sum_small_example():
    rng = np.random.default_rng(1)
    mats = [random_adjacency(rng, 4) for _ in range(6)]
    state = state_of(mats)
    for t in range(2, 7):
        for s in range(1, t):
            np.testing.assert_allclose(cusum(state, s, t).entries, naive_cusum(mats, s, t), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 8), t=st.integers(2, 15), seed=st.integers(0, 10_000))
def test_cusum_oracle_property(n, t, seed):
    rng = np.random.default_rng(seed)
    mats = [random_adjacency(rng, n) for _ in range(t)]
    state = state_of(mats)
    s = int(rng.integers(1, t))
    np.testing.assert_allclose(cusum(state, s, t).entries, naive_cusum(mats, s, t), atol=1e-12)


def test_cusum_of_constant_stream_vanishes():
    a = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    state = state_of([a] * 9)
    for s in range(1, 9):
        np.testing.assert_allclose(cusum(state, s, 9).entries, 0.0, atol=1e-12)


def test_cusum_coefficients_balance():
    # s * w_before == (t - s) * w_after, so constant inputs cancel
    for t in range(2, 30):
        for s in range(1, t):
            wb, wa = cusum_coefficients(s, t)
            assert s * wb == pytest.approx((t - s) * wa, rel=1e-12)


def test_cusum_rejects_bad_indices():
    state = state_of([np.zeros((2, 2))] * 4)
    for s, t in [(0, 3), (3, 3), (2, 5)]:
        with pytest.raises(ValueError):
            cusum(state, s, t)


def test_ring_buffer_agrees_on_grid_and_evicts_old_prefixes():
    rng = np.random.default_rng(7)
    mats = [random_adjacency(rng, 5) for _ in range(40)]
    full, ring = CusumState(5), CusumState(5, ring=True)
    for k, m in enumerate(mats, start=1):
        snap = AdjacencySnapshot(m, k)
        full.append(snap)
        ring.append(snap)
        if k >= 2:
            for s in geometric_grid(k):
                np.testing.assert_array_equal(cusum(ring, s, k).entries, cusum(full, s, k).entries)
    assert min(ring.retained) >= 20
    with pytest.raises(IndexError):
        ring.prefix(3)


def test_expected_cusum_matches_monte_carlo():
    n, delta, t, s = 4, 6, 10, 4
    rng = np.random.default_rng(11)
    p1 = np.full((n, n), 0.2)
    p2 = np.full((n, n), 0.6)
    np.fill_diagonal(p1, 0)
    np.fill_diagonal(p2, 0)
    sc = ChangeScenario.from_graphons(GraphonMatrix(p1), GraphonMatrix(p2), delta)
    reps = 2000
    draws = np.empty((reps, n, n))
    for r in range(reps):
        mats = []
        for u in range(1, t + 1):
            p = p1 if u <= delta else p2
            upper = np.triu(rng.random((n, n)) < p, k=1)
            mats.append((upper | upper.T).astype(np.uint8))
        draws[r] = cusum(state_of(mats), s, t).entries
    mean, se = draws.mean(axis=0), draws.std(axis=0, ddof=1) / math.sqrt(reps)
    expected = expected_cusum(sc, s, t)
    off = ~np.eye(n, dtype=bool)
    assert np.all(np.abs(mean - expected)[off] <= 3.5 * se[off])
    np.testing.assert_array_equal(expected[~off], 0.0)


def test_expected_cusum_zero_before_change():
    p = np.full((3, 3), 0.5)
    np.fill_diagonal(p, 0)
    q = p * 0.5
    sc = ChangeScenario.from_graphons(GraphonMatrix(p), GraphonMatrix(q), 10)
    assert not expected_cusum(sc, 3, 10).any()
    assert expected_cusum(sc, 3, 11).any()


# -- grid -----------------------------------------------------------------


@pytest.mark.parametrize(
    "t, grid",
    [(2, [1]), (3, [2]), (4, [3, 2]), (8, [7, 6, 4]), (10, [9, 8, 6]), (16, [15, 14, 12, 8])],
)
def test_geometric_grid_examples(t, grid):
    assert geometric_grid(t) == grid


@given(st.integers(2, 5000))
def test_geometric_grid_properties(t):
    grid = geometric_grid(t)
    assert len(grid) == math.floor(math.log2(t))
    assert all(1 <= s < t for s in grid)
    assert grid == sorted(grid, reverse=True)


def test_geometric_grid_rejects_short_time():
    with pytest.raises(ValueError):
        geometric_grid(1)


# -- jump size ------------------------------------------------------------


def test_jump_size_identical_graphons():
    p = GraphonMatrix(np.zeros((3, 3)))
    assert jump_size(p, p) == (0.0, 0.0, 0)


def test_jump_size_values_and_rank():
    p = np.full((4, 4), 0.5)
    q = np.full((4, 4), 0.3)
    np.fill_diagonal(p, 0)
    np.fill_diagonal(q, 0)
    kappa, kappa0, r = jump_size(GraphonMatrix(p), GraphonMatrix(q), rho=0.5)
    assert kappa == pytest.approx(0.2 * math.sqrt(12), abs=1e-12)
    assert kappa0 == pytest.approx(kappa / (4 * 0.5), abs=1e-12)
    # 0.2 * (J - I) has full rank
    assert r == 4


def test_numerical_rank_of_outer_product():
    v = np.arange(1.0, 6.0)
    assert numerical_rank(np.outer(v, v)) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0
