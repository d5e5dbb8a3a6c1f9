import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secure_inference.consensus import (
    MALICIOUS, NORMAL, RELIABLE, adaptive_weight_step, average_consensus, average_consensus_step,
    check_weights, deviation_weight, leblanc_estimator_step, leblanc_run, metropolis_weights,
    run_consensus_experiment, trim_extremes, trim_steps, wmsr_run, wmsr_step,
)
from secure_inference.estimator import EstimatorParams, consensus_innovations_step
from secure_inference.topology import Graph, connected_geometric_graph

PATH3 = Graph(3, ((0, 1), (1, 2)))


def complete(n):
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def test_metropolis_weights_are_valid():
    w = metropolis_weights(PATH3)
    check_weights(w, PATH3)
    np.testing.assert_allclose(w, w.T)


def test_average_consensus_examples():
    w = metropolis_weights(PATH3)
    np.testing.assert_allclose(average_consensus_step(np.full(3, 4.2), w), 4.2)
    np.testing.assert_allclose(average_consensus([0.0, 3.0, 6.0], w, 1000), 3.0, atol=1e-9)
    w2 = np.full((2, 2), 0.5)
    np.testing.assert_allclose(average_consensus_step([0.0, 2.0], w2), [1.0, 1.0])


def test_wmsr_examples():
    assert trim_extremes(5, [1, 2, 9, 10], 1).tolist() == [False, True, True, False]
    assert wmsr_step(5, [1, 2, 9, 10], 1) == pytest.approx((5 + 2 + 9) / 3)
    assert wmsr_step(5, [7, 8], 3) == pytest.approx(5.0)


def test_wmsr_tie_break_by_node_index():
    keep = trim_extremes(0.0, [4.0, 4.0, 1.0], 1, ids=[7, 3, 5])
    assert keep.tolist() == [True, False, True]


def test_wmsr_custom_weights_renormalized():
    # self 0.5, neighbors 0.25 each; the trimmed neighbor's weight is dropped
    out = wmsr_step(0.0, [1.0, 100.0], 1, weights=[0.5, 0.25, 0.25])
    assert out == pytest.approx(0.25 / 0.75)


def test_wmsr_extreme_byzantine_trimmed():
    g = complete(5)
    init = np.random.default_rng(1).uniform(0, 1, 5)
    traj = wmsr_run(g, init, 1, {0: lambda t, r: 1e6}, steps=50)
    assert (traj[:, 1:] >= 0).all() and (traj[:, 1:] <= 1).all()


def test_leblanc_examples():
    assert leblanc_estimator_step(NORMAL, 2.0, [3.0, 1.5], [1.0, -0.5], 1) == pytest.approx(2.0)
    assert trim_steps(np.array([3.0, 1.0, -2.0]), 1).tolist() == [False, True, False]
    assert leblanc_estimator_step(RELIABLE, 0.0, [], [], 1, p=4.0) == 4.0
    with pytest.raises(ValueError):
        leblanc_estimator_step(MALICIOUS, 0.0, [], [], 1)


def test_leblanc_chain_converges():
    g = Graph(2, ((0, 1),))
    # relative measurement of node 1 from node 0: p_0 - p_1 = -1
    traj = leblanc_run(g, [RELIABLE, NORMAL], np.array([0.0, 1.0]), 0, steps=1000)
    assert traj[-1, 1] == pytest.approx(1.0, abs=1e-9)
    ref = 0.0
    for _ in range(1000):
        ref = ref + 0.5 * (1.0 - ref)
    assert traj[-1, 1] == pytest.approx(ref)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 15))
def test_leblanc_recovers_parameters(seed, n):
    g, _ = connected_geometric_graph(n, 1000.0, 600.0, seed)
    rng = np.random.default_rng(seed)
    p = rng.uniform(-5, 5, n)
    kinds = [NORMAL] * n
    kinds[int(rng.integers(n))] = RELIABLE
    traj = leblanc_run(g, kinds, p, 0, steps=3000)
    np.testing.assert_allclose(traj[-1], p, atol=1e-4)


def test_deviation_weight_shape():
    assert deviation_weight(0.0, 2.0) == 1.0
    assert deviation_weight(2.0, 2.0) == pytest.approx(0.5)
    assert deviation_weight(1e9, 2.0) < 1e-15


def test_adaptive_step_matches_plain_step_for_small_deviations():
    x = np.array([1.0, 2.0])
    nbrs = [x + 1e-4, x - 2e-4]
    h = np.eye(2)
    y = x + 1e-4
    plain = consensus_innovations_step(x, nbrs, y, h, EstimatorParams(0.1, 0.2, 1.0, 0.25, 0.5, 10.0))
    adaptive = adaptive_weight_step(x, nbrs, y, h, 0.1, 0.2, c=10.0)
    np.testing.assert_allclose(adaptive, plain, atol=1e-3 * np.abs(plain).max())


def test_adaptive_weight_disconnects_diverging_neighbor():
    out = [adaptive_weight_step(0.0, [0.0, 10.0 ** k], 0.0, 1.0, 0.1, 0.2, c=1.0) for k in range(2, 8)]
    assert abs(out[-1]) < abs(out[0])
    assert abs(out[-1]) < 1e-6


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_wmsr_stays_in_normal_envelope(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 10))
    g = complete(n)
    bad = {0: lambda t, r: r.uniform(-1e6, 1e6)}
    traj = wmsr_run(g, rng.uniform(-1, 1, n), 1, bad, steps=30, rng=rng)
    normal = traj[:, 1:]
    lo, hi = normal.min(axis=1), normal.max(axis=1)
    assert (np.diff(lo) >= -1e-12).all() and (np.diff(hi) <= 1e-12).all()


def test_experiment_runner_algorithms():
    g = complete(6)
    for algo in ("avg", "wmsr", "leblanc", "adaptive"):
        traj, target = run_consensus_experiment(algo, g, 400, seed=1, f=1, byzantine=[0] if algo != "avg" else [],
                                                reliable=[1])
        assert traj.shape == (401, 6)
    with pytest.raises(ValueError):
        run_consensus_experiment("nope", g, 1)
