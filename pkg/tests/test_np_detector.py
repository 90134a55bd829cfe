import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcpd.detector import DetectorConfig, SplitStreams
from netcpd.generators import ScenarioSpec, iter_stream
from netcpd.graph_core import AdjacencySnapshot
from netcpd.np_detector import (
    BlockAssignment,
    block_loss,
    block_means,
    fitted_matrix,
    np_fit,
    np_run,
    np_run_multi,
    np_step,
    parse_strategy,
)
from oracles import block_loss_naive, brute_force_block_fit, random_symmetric


def swap_scenario(n, delta, horizon, high=0.95, low=0.05):
    z = np.arange(n) < n // 2
    same = z[:, None] == z[None, :]
    return ScenarioSpec(
        "custom", n, delta, horizon, theta_before=np.where(same, high, low), theta_after=np.where(same, low, high)
    )


# -- block_loss / block_means ----------------------------------------------


def test_assignment_validation():
    with pytest.raises(ValueError):
        BlockAssignment((0, 2), 2)
    with pytest.raises(ValueError):
        BlockAssignment((0,), 0)


def test_perfect_fit_has_zero_loss():
    z = BlockAssignment((0, 0, 1, 1, 1), 2)
    q = np.array([[0.3, 0.1], [0.1, 0.7]])
    m = fitted_matrix(q, z)
    assert block_loss(m, q, z) == 0.0


def test_zero_q_gives_sum_of_squares():
    m = random_symmetric(np.random.default_rng(0), 5)
    z = BlockAssignment((0, 1, 0, 1, 1), 2)
    off = m - np.diag(np.diagonal(m))
    assert block_loss(m, np.zeros((2, 2)), z) == pytest.approx(np.sum(off**2), abs=1e-12)


def test_block_loss_matches_double_loop():
    rng = np.random.default_rng(1)
    m = random_symmetric(rng, 5)
    z = BlockAssignment(tuple(int(a) for a in rng.integers(0, 3, 5)), 3)
    q = random_symmetric(rng, 3)
    naive = sum(
        (m[i, j] - q[z.z[i], z.z[j]]) ** 2 for i in range(5) for j in range(5) if i != j
    )
    assert block_loss(m, q, z) == pytest.approx(naive, abs=1e-12)


def test_block_loss_shape_errors():
    z = BlockAssignment((0, 1), 2)
    with pytest.raises(ValueError):
        block_loss(np.zeros((3, 3)), np.zeros((2, 2)), z)
    with pytest.raises(ValueError):
        block_loss(np.zeros((2, 2)), np.zeros((3, 3)), z)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), r0=st.integers(1, 3), seed=st.integers(0, 10_000))
def test_block_means_are_locally_optimal(n, r0, seed):
    rng = np.random.default_rng(seed)
    m = random_symmetric(rng, n)
    z = BlockAssignment(tuple(int(a) for a in rng.integers(0, r0, n)), r0)
    q = block_means(m, z)
    base = block_loss(m, q, z)
    for a in range(r0):
        for b in range(a, r0):
            for eps in (0.01, -0.01):
                p = q.copy()
                p[a, b] += eps
                p[b, a] = p[a, b]
                assert block_loss(m, p, z) >= base - 1e-12


def test_empty_block_gets_zero():
    q = block_means(np.ones((3, 3)), BlockAssignment((0, 0, 0), 2))
    assert q[1, 1] == 0.0 and q[0, 1] == 0.0
    assert q[0, 0] == 1.0


# -- np_fit -------------------------------------------------------------------


def test_single_block_is_offdiagonal_mean():
    m = random_symmetric(np.random.default_rng(2), 6)
    fit = np_fit(m, 1)
    off = ~np.eye(6, dtype=bool)
    assert fit.q[0, 0] == pytest.approx(m[off].mean(), abs=1e-12)
    np.testing.assert_allclose(fit.fitted[off], m[off].mean(), atol=1e-12)
    np.testing.assert_array_equal(np.diagonal(fit.fitted), 0.0)


def test_exact_two_block_matrix_recovered():
    z = BlockAssignment((0, 1, 0, 1, 1, 0), 2)
    m = fitted_matrix(np.array([[0.8, 0.2], [0.2, 0.5]]), z)
    fit = np_fit(m, 2)
    assert fit.loss == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(fit.fitted, m, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_exhaustive_matches_enumeration(seed):
    m = random_symmetric(np.random.default_rng(seed), 7)
    fit = np_fit(m, 2)
    assert fit.loss == pytest.approx(brute_force_block_fit(m, 2), abs=1e-10)
    assert fit.loss == pytest.approx(block_loss_naive(m, fit.assignment.z, 2), abs=1e-10)


def test_exhaustive_three_blocks_small():
    m = random_symmetric(np.random.default_rng(42), 5)
    assert np_fit(m, 3).loss == pytest.approx(brute_force_block_fit(m, 3), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 9), seed=st.integers(0, 10_000))
def test_exhaustive_never_worse_than_alternating(n, seed):
    m = random_symmetric(np.random.default_rng(seed), n)
    ex = np_fit(m, 2)
    for strategy in ("alt", "alt:1,1", "alt:3,5"):
        assert ex.loss <= np_fit(m, 2, strategy).loss + 1e-12


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 9), seed=st.integers(0, 10_000))
def test_one_block_per_node_has_zero_loss(n, seed):
    m = random_symmetric(np.random.default_rng(seed), n)
    assert np_fit(m, n).loss == pytest.approx(0.0, abs=1e-20)


def test_label_permutation_leaves_fit_unchanged():
    rng = np.random.default_rng(3)
    m = random_symmetric(rng, 7)
    fit = np_fit(m, 3)
    for perm in itertools.permutations(range(3)):
        z = BlockAssignment(tuple(perm[a] for a in fit.assignment.z), 3)
        q = block_means(m, z)
        assert block_loss(m, q, z) == pytest.approx(fit.loss, abs=1e-12)
        np.testing.assert_allclose(fitted_matrix(q, z), fit.fitted, atol=1e-12)


def test_fit_loss_consistent_with_definition():
    m = random_symmetric(np.random.default_rng(4), 8)
    for strategy in ("exhaustive", "alt"):
        fit = np_fit(m, 2, strategy)
        assert fit.loss == pytest.approx(block_loss(m, fit.q, fit.assignment), abs=1e-10)
        np.testing.assert_allclose(fit.q, fit.q.T)


def test_alternating_recovers_planted_blocks():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 3, 40)
    z = BlockAssignment(tuple(int(a) for a in labels), 3)
    m = fitted_matrix(np.array([[0.9, 0.1, 0.2], [0.1, 0.8, 0.1], [0.2, 0.1, 0.7]]), z)
    m = m + 0.01 * random_symmetric(rng, 40)
    fit = np_fit(m, 3, "alt")
    assert fit.loss <= block_loss(m, block_means(m, z), z) + 1e-12


def test_exhaustive_cap():
    with pytest.raises(ValueError):
        np_fit(np.zeros((25, 25)), 2)


@pytest.mark.parametrize("text, parsed", [("exhaustive", ("exhaustive", 0, 0)), ("alt", ("alternating", 10, 100)), ("alt:3,7", ("alternating", 3, 7))])
def test_parse_strategy(text, parsed):
    assert parse_strategy(text) == parsed


@pytest.mark.parametrize("text", ["alt:0,3", "greedy", "alt:3"])
def test_parse_strategy_rejects(text):
    with pytest.raises(ValueError):
        parse_strategy(text)


# -- detection ------------------------------------------------------------------


def test_np_zero_stream_never_fires():
    snaps = [AdjacencySnapshot(np.zeros((6, 6)), k) for k in range(1, 41)]
    assert not np_run(snaps, DetectorConfig(rho_hat=0.1), r0=2).fired
    assert np_run_multi(snaps, DetectorConfig(rho_hat=0.1), r0=2) == []


def test_np_step_matches_np_run():
    spec = swap_scenario(8, 20, 60)
    snaps = list(iter_stream(spec, 3))
    cfg = DetectorConfig(rho_hat=0.95, r0=2)
    streams = SplitStreams(8)
    for k in range(0, len(snaps), 2):
        out = np_step(streams, cfg, snaps[k], snaps[k + 1])
        if out.fired:
            break
    assert out == np_run(snaps, cfg)


def test_np_fires_after_change_in_simulation():
    spec = swap_scenario(8, 40, 120)
    cfg = DetectorConfig(rho_hat=0.95, r0=2)
    hits = 0
    for seed in range(50):
        out = np_run(iter_stream(spec, seed), cfg)
        hits += out.fired and out.t_raw > 40
    assert hits >= 45


def test_exhaustive_not_slower_than_crippled_search():
    spec = swap_scenario(10, 40, 160, high=0.6, low=0.3)
    cfg = DetectorConfig(rho_hat=0.6, r0=2)
    wins = 0
    for seed in range(20):
        snaps = list(iter_stream(spec, seed))
        ex = np_run(snaps, cfg, strategy="exhaustive")
        weak = np_run(snaps, cfg, strategy="alt:1,1")
        t_ex = ex.t_raw if ex.fired else np.inf
        t_weak = weak.t_raw if weak.fired else np.inf
        wins += t_ex <= t_weak
    assert wins >= 10
