"""Byzantine agent behaviour and the strong/weak compromise scenarios."""

from dataclasses import dataclass, field

import numpy as np

from .measurement import Measurement, center_sector
from .rng import TAG_ADVERSARY, round_generator
from .topology import is_connected, is_globally_observable

DEFAULT_SAFETY = 0.9


@dataclass(frozen=True)
class ConstantBroadcast:
    value: tuple

    name = "constant"


@dataclass(frozen=True)
class RandomBroadcast:
    scale: float

    name = "random"


@dataclass(frozen=True)
class StealthyBias:
    """Push ``component`` while staying within ``safety * gamma_t`` of every neighbor.

    With ``target`` set, the push stops once the component reaches it;
    otherwise the broadcast moves as far as possible along ``direction``.
    """

    component: int
    direction: float = 1.0
    target: float = None
    safety: float = DEFAULT_SAFETY

    name = "stealthy_bias"

    def __post_init__(self):
        if not 0.0 < self.safety < 1.0:
            raise ValueError("safety margin must lie in (0, 1)")


@dataclass(frozen=True)
class MeasurementOffset:
    """Compromised nodes keep running the estimator on ``y + offset``."""

    offset: tuple

    name = "measurement_offset"


STRATEGIES = {cls.name: cls for cls in (ConstantBroadcast, RandomBroadcast, StealthyBias, MeasurementOffset)}


@dataclass(frozen=True)
class AttackSpec:
    compromised: frozenset = field(default_factory=frozenset)
    strategy: object = None

    def __post_init__(self):
        object.__setattr__(self, "compromised", frozenset(int(n) for n in self.compromised))
        if self.compromised and self.strategy is None:
            raise ValueError("compromised nodes need a strategy")

    def uncompromised(self, node_count):
        return sorted(set(range(node_count)) - self.compromised)

    def broadcasts_falsely(self):
        return self.strategy is not None and not isinstance(self.strategy, MeasurementOffset)

    def to_dict(self):
        d = {"compromised": sorted(self.compromised), "strategy": None}
        if self.strategy is not None:
            params = {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in self.strategy.__dict__.items()}
            d["strategy"] = {"name": self.strategy.name, **params}
        return d

    @classmethod
    def from_dict(cls, d):
        strat = d.get("strategy")
        if strat is not None:
            strat = dict(strat)
            kind = STRATEGIES[strat.pop("name")]
            for key in ("value", "offset"):
                if key in strat:
                    strat[key] = tuple(float(v) for v in np.atleast_1d(strat[key]))
            strat = kind(**strat)
        return cls(frozenset(d.get("compromised", ())), strat)


NO_ATTACK = AttackSpec()


def stealthy_point(center, direction, neighbor_states, radius, max_step=np.inf):
    """Largest ``lam`` in ``[0, max_step]`` with ``center + lam*direction`` inside every ball.

    Balls have the given ``radius`` around each neighbor state.  Returns the
    point, or ``None`` when no such ``lam`` exists.
    """
    center = np.asarray(center, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    nb = np.asarray(neighbor_states, dtype=np.float64).reshape(-1, center.size)
    diff = center - nb
    cc = np.einsum("ij,ij->i", diff, diff) - radius ** 2
    a = float(d @ d)
    if a == 0.0:
        return None if (cc > 0).any() else center.copy()
    b = diff @ d
    disc = b * b - a * cc
    if (disc < 0).any():
        return None
    root = np.sqrt(disc)
    lo = max(0.0, float(((-b - root) / a).max(initial=0.0)))
    hi = min(float(max_step), float(((-b + root) / a).min(initial=np.inf)))
    if lo > hi:
        return None
    return center + hi * d


def byzantine_broadcast(strategy, own_view, gamma, t, rng_stream=None, own_state=None, node=0):
    """State a compromised agent sends at round ``t``.

    ``own_view`` lists the current states of the agent's uncompromised
    neighbors; ``rng_stream`` is a seed used by :class:`RandomBroadcast`.
    """
    own_view = np.asarray(own_view, dtype=np.float64)
    if own_view.size == 0:
        own_view = np.zeros((0, np.asarray(own_state).size if own_state is not None else 0))
    if isinstance(strategy, ConstantBroadcast):
        return np.array(strategy.value, dtype=np.float64)
    if isinstance(strategy, RandomBroadcast):
        m = own_view.shape[1] if len(own_view) else np.asarray(own_state).size
        gen = round_generator(int(rng_stream or 0), TAG_ADVERSARY + int(node), t)
        return gen.uniform(-strategy.scale, strategy.scale, size=m)
    if isinstance(strategy, StealthyBias):
        if len(own_view):
            center = own_view.mean(axis=0)
        else:
            center = np.asarray(own_state, dtype=np.float64).copy()
        k = strategy.component
        d = np.zeros_like(center)
        if strategy.target is None:
            d[k] = np.sign(strategy.direction) or 1.0
            max_step = np.inf
        else:
            d[k] = strategy.target - center[k]
            max_step = 1.0
        if not len(own_view):
            if np.isinf(max_step):
                return center
            return center + d
        point = stealthy_point(center, d, own_view, strategy.safety * gamma, max_step)
        return center if point is None else point
    if isinstance(strategy, MeasurementOffset):
        return np.asarray(own_state, dtype=np.float64)
    raise TypeError(f"unknown strategy {strategy!r}")


def falsify_measurement(y, offset):
    offset = np.asarray(offset, dtype=np.float64)
    if offset.shape != y.value.shape:
        raise ValueError("offset dimension does not match the measurement")
    return Measurement(y.node, y.time, y.value + offset)


def default_stealthy_strategy(theta, sectors_per_side, scale=1.5, safety=DEFAULT_SAFETY):
    """Pin the center component at ``scale`` times its true value."""
    c = center_sector(sectors_per_side)
    return StealthyBias(component=c, direction=1.0, target=float(scale * theta[c]), safety=safety)


def scenario_strong(graph, assignment, sectors_per_side, strategy=None):
    """Every node of the center sector is compromised."""
    c = center_sector(sectors_per_side)
    nodes = np.flatnonzero(np.asarray(assignment) == c)
    if nodes.size == 0:
        raise ValueError("center sector has no nodes")
    return AttackSpec(frozenset(nodes.tolist()), strategy)


def scenario_weak(graph, assignment, sectors_per_side, h_list, rng_seed, strategy=None, max_retries=100):
    """A uniformly random half (rounded down) of the center sector is compromised.

    Redraws until the uncompromised subnetwork is connected and globally
    observable.
    """
    c = center_sector(sectors_per_side)
    nodes = np.flatnonzero(np.asarray(assignment) == c)
    if nodes.size == 0:
        raise ValueError("center sector has no nodes")
    k = nodes.size // 2
    for attempt in range(max_retries + 1):
        rng = np.random.default_rng(rng_seed + attempt)
        chosen = frozenset(rng.choice(nodes, size=k, replace=False).tolist())
        keep = sorted(set(range(graph.node_count)) - chosen)
        if is_connected(graph.subgraph(keep)) and is_globally_observable(h_list, keep):
            return AttackSpec(chosen, strategy)
    raise RuntimeError(
        f"no weak compromise set keeps the uncompromised network connected and observable "
        f"after {max_retries + 1} draws (center sector has {nodes.size} nodes)"
    )
