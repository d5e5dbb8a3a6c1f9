"""Resilient consensus rules on scalar states.

Vector states are handled componentwise by the callers.  All runners use
synchronous rounds: every node reads its neighbors' round-``t`` values,
then every node updates.
"""

import numpy as np

RELIABLE, NORMAL, MALICIOUS = "reliable", "normal", "malicious"


def metropolis_weights(graph):
    """``w_jn = 1 / (1 + max(deg_j, deg_n))`` on edges; the diagonal absorbs the rest."""
    deg = graph.degrees()
    n = graph.node_count
    w = np.zeros((n, n))
    for i, j in graph.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    return w


def check_weights(w, graph=None, atol=1e-12):
    w = np.asarray(w, dtype=np.float64)
    if (w < -atol).any():
        raise ValueError("weights must be nonnegative")
    if not np.allclose(w.sum(axis=1), 1.0, atol=1e-10):
        raise ValueError("weights must be row-stochastic")
    if graph is not None:
        allowed = graph.adjacency() + np.eye(graph.node_count)
        if (w[allowed == 0] > atol).any():
            raise ValueError("weights must be supported on edges and the diagonal")
    return w


def average_consensus_step(states, weights):
    return np.asarray(weights) @ np.asarray(states, dtype=np.float64)


def average_consensus(states, weights, steps):
    x = np.asarray(states, dtype=np.float64)
    for _ in range(steps):
        x = weights @ x
    return x


def trim_extremes(own, values, f, ids=None):
    """Boolean mask of ``values`` that survive F-trimming around ``own``.

    Up to ``f`` of the values strictly above ``own`` are removed, largest
    first, and likewise up to ``f`` strictly below, smallest first.  Equal
    values are removed in increasing ``ids`` order.
    """
    values = np.asarray(values, dtype=np.float64)
    ids = np.arange(values.size) if ids is None else np.asarray(ids)
    keep = np.ones(values.size, dtype=bool)
    above = np.flatnonzero(values > own)
    below = np.flatnonzero(values < own)
    if above.size:
        order = np.lexsort((ids[above], -values[above]))
        keep[above[order[:f]]] = False
    if below.size:
        order = np.lexsort((ids[below], values[below]))
        keep[below[order[:f]]] = False
    return keep


def _renormalized(weights, keep):
    """Own weight first, then one weight per neighbor; renormalize over survivors."""
    if weights is None:
        w = np.ones(keep.size + 1)
    else:
        w = np.asarray(weights, dtype=np.float64).copy()
    w[1:][~keep] = 0.0
    return w / w.sum()


def wmsr_step(own, neighbor_values, f, weights=None, ids=None):
    """W-MSR update of one node.

    ``weights`` (optional) has the self weight first and then one weight per
    neighbor; the default is uniform.  Trimmed neighbors' weights are
    dropped and the rest renormalized, so the output is a convex combination
    of ``own`` and the surviving values.
    """
    values = np.asarray(neighbor_values, dtype=np.float64)
    keep = trim_extremes(own, values, f, ids)
    w = _renormalized(weights, keep)
    return float(w[0] * own + w[1:] @ np.where(keep, values, 0.0))


def wmsr_run(graph, init, f, byzantine=None, steps=1000, rng=None):
    """Iterate W-MSR on ``graph``; returns the (steps+1, N) trajectory.

    ``byzantine`` maps node -> callable ``(t, rng) -> value`` giving what
    that node broadcasts each round.  Byzantine entries in the trajectory
    hold their broadcast values.
    """
    byzantine = byzantine or {}
    nbrs = graph.neighbors()
    x = np.asarray(init, dtype=np.float64).copy()
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for t in range(steps):
        sent = x.copy()
        for b, fn in byzantine.items():
            sent[b] = fn(t, rng)
        new = sent.copy()
        for n in range(x.size):
            if n in byzantine:
                continue
            new[n] = wmsr_step(x[n], sent[nbrs[n]], f, ids=nbrs[n])
        x = new
        out[t + 1] = x
    return out


def step_values(own_state, neighbor_states, relative):
    """``s_ln = x_l - x_n - xi_ln`` for each neighbor ``l``."""
    return np.asarray(neighbor_states, dtype=np.float64) - own_state - np.asarray(relative, dtype=np.float64)


def trim_steps(s, f):
    """Mask keeping all but the ``f`` largest positive and ``f`` most negative steps."""
    return trim_extremes(0.0, s, f)


def leblanc_estimator_step(kind, own_state, neighbor_states, relative_measurements, f,
                           weights=None, p=None):
    """One update of the relative-measurement resilient estimator.

    Reliable nodes return their directly measured ``p``.  Normal nodes add
    a weighted sum of the surviving step values to their state; by default
    each survivor gets weight ``1 / (1 + number of neighbors)``.
    """
    if kind == RELIABLE:
        if p is None:
            raise ValueError("reliable nodes need their parameter p")
        return float(p)
    if kind != NORMAL:
        raise ValueError(f"cannot run the estimator for a {kind} node")
    s = step_values(own_state, neighbor_states, relative_measurements)
    keep = trim_steps(s, f)
    w = _renormalized(weights, np.ones(s.size, dtype=bool))[1:]
    return float(own_state + (w * keep) @ s)


def relative_measurements(graph, p):
    """Noiseless ``xi[n][k] = p_l - p_n`` for the k-th neighbor ``l`` of ``n``."""
    p = np.asarray(p, dtype=np.float64)
    return [p[nb] - p[n] for n, nb in enumerate(graph.neighbors())]


def leblanc_run(graph, kinds, p, f, steps=1000, malicious=None, init=None, rng=None):
    """Iterate the estimator; ``malicious`` maps node -> ``(t, rng) -> value``."""
    malicious = malicious or {}
    nbrs = graph.neighbors()
    xi = relative_measurements(graph, p)
    x = np.zeros(graph.node_count) if init is None else np.asarray(init, dtype=np.float64).copy()
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for t in range(steps):
        sent = x.copy()
        for b, fn in malicious.items():
            sent[b] = fn(t, rng)
        new = sent.copy()
        for n in range(x.size):
            if kinds[n] == MALICIOUS:
                continue
            new[n] = leblanc_estimator_step(kinds[n], x[n], sent[nbrs[n]], xi[n], f, p=p[n])
        x = new
        out[t + 1] = x
    return out


def deviation_weight(d, c):
    """``1 / (1 + (d/c)^2)``: 1 at ``d = 0``, 1/2 at ``d = c``, vanishing as ``d`` grows."""
    return 1.0 / (1.0 + (np.asarray(d, dtype=np.float64) / c) ** 2)


def adaptive_weight_step(own_estimate, neighbor_estimates, measurement, h, alpha, beta, c,
                         c_innovation=None):
    """Consensus+innovations step with deviation-scaled weights.

    Each neighbor's consensus weight ``beta`` is scaled by
    ``deviation_weight(|x_l - x_n|, c)`` and the innovation gain ``alpha``
    by ``deviation_weight(|y - H x_n|, c_innovation)``.
    """
    x = np.atleast_1d(np.asarray(own_estimate, dtype=np.float64))
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    y = np.atleast_1d(np.asarray(measurement, dtype=np.float64))
    c_innovation = c if c_innovation is None else c_innovation
    consensus = np.zeros_like(x)
    for xl in neighbor_estimates:
        diff = x - np.atleast_1d(np.asarray(xl, dtype=np.float64))
        consensus += deviation_weight(np.linalg.norm(diff), c) * diff
    resid = y - h @ x
    innov = deviation_weight(np.linalg.norm(resid), c_innovation) * (h.T @ resid)
    out = x - beta * consensus + alpha * innov
    return out if np.ndim(own_estimate) else float(out[0])


def adaptive_run(graph, theta, alpha, beta, c, steps=1000, noise_std=1.0, byzantine=None,
                 c_innovation=None, seed=0):
    """Scalar-parameter estimation with :func:`adaptive_weight_step` at every honest node.

    Every node observes ``theta + noise`` each round; ``byzantine`` maps
    node -> ``(t, rng) -> value`` for broadcast falsification.
    """
    byzantine = byzantine or {}
    rng = np.random.default_rng(seed)
    nbrs = graph.neighbors()
    x = np.zeros(graph.node_count)
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for t in range(steps):
        y = theta + noise_std * rng.standard_normal(x.size)
        sent = x.copy()
        for b, fn in byzantine.items():
            sent[b] = fn(t, rng)
        new = sent.copy()
        for n in range(x.size):
            if n in byzantine:
                continue
            new[n] = adaptive_weight_step(x[n], sent[nbrs[n]], y[n], 1.0, alpha, beta, c, c_innovation)
        x = new
        out[t + 1] = x
    return out


def run_consensus_experiment(algo, graph, steps, seed=0, f=1, byzantine=(), reliable=(),
                             byzantine_scale=1e6, alpha=0.05, beta=None, noise_std=1.0):
    """Run one consensus variant with random data; returns ``(trajectory, target)``.

    ``target`` is the per-node reference used for error reporting: the
    initial average of the non-Byzantine nodes for ``avg``/``wmsr``, each
    node's ``p`` for ``leblanc`` and the common parameter for ``adaptive``.
    """
    rng = np.random.default_rng(seed)
    n = graph.node_count
    byzantine = sorted(int(b) for b in byzantine)
    normal = [k for k in range(n) if k not in byzantine]

    def attacker(t, r):
        return r.uniform(-byzantine_scale, byzantine_scale)

    adv = {b: attacker for b in byzantine}
    if algo == "avg":
        init = rng.uniform(0.0, 10.0, n)
        traj = np.empty((steps + 1, n))
        traj[0] = init
        w = metropolis_weights(graph)
        for t in range(steps):
            traj[t + 1] = average_consensus_step(traj[t], w)
        return traj, np.full(n, init.mean())
    if algo == "wmsr":
        init = rng.uniform(0.0, 1.0, n)
        traj = wmsr_run(graph, init, f, adv, steps, rng)
        return traj, np.full(n, init[normal].mean())
    if algo == "leblanc":
        p = rng.uniform(0.0, 10.0, n)
        kinds = [MALICIOUS if k in byzantine else RELIABLE if k in reliable else NORMAL for k in range(n)]
        traj = leblanc_run(graph, kinds, p, f, steps, adv, rng=rng)
        return traj, p
    if algo == "adaptive":
        theta = float(rng.uniform(0.0, 10.0))
        if beta is None:
            beta = 1.0 / (1.0 + graph.degrees().max())
        traj = adaptive_run(graph, theta, alpha, beta, 5.0 * noise_std, steps, noise_std, adv, seed=seed)
        return traj, np.full(n, theta)
    raise ValueError(f"unknown consensus algorithm {algo!r}")
