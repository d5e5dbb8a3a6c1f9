"""Scenario configuration: JSON schema, presets and resolution into run inputs."""

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adversary as adv
from .estimator import EstimatorParams, choose_gains, spectral_radius
from .measurement import Parameter, sample_parameter, sector_assignment, sector_selector_spec
from .rng import TAG_ATTACK_SET, TAG_GRAPH, TAG_THETA, derive_seed
from .topology import random_geometric_graph, is_connected, is_globally_observable, laplacian, read_graph

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "scenario",
    "seed": 0,
    "graph": {"n": 50, "side": 2000.0, "radius": 600.0, "seed": None, "max_retries": 100},
    "sectors_per_side": 3,
    "theta": {"low": 0.0, "high": 160.0},
    "noise_var": 10.0,
    "estimator": {"alpha": "auto", "beta": "auto", "r1": "auto", "big_k": 0.01, "tau": 0.25, "eta": "auto"},
    "attack": {"scenario": "none"},
    "horizon": 20000,
    "init": "zero",
    "convergence_threshold": 0.05,
}

PRESETS = {
    "desk_no_adversary": {"name": "desk_no_adversary"},
    "desk_strong": {"name": "desk_strong", "attack": {"scenario": "strong", "strategy": {
        "name": "stealthy_bias", "target_scale": 1.5, "safety": 0.9}}},
    "desk_weak": {"name": "desk_weak", "attack": {"scenario": "weak", "strategy": {
        "name": "stealthy_bias", "target_scale": 1.5, "safety": 0.9}}},
    "full_no_adversary": {"name": "full_no_adversary",
                          "graph": {"n": 500, "side": 2000.0, "radius": 200.0}},
    "full_strong": {"name": "full_strong", "graph": {"n": 500, "side": 2000.0, "radius": 200.0},
                    "attack": {"scenario": "strong", "strategy": {
                        "name": "stealthy_bias", "target_scale": 1.5, "safety": 0.9}}},
    "full_weak": {"name": "full_weak", "graph": {"n": 500, "side": 2000.0, "radius": 200.0},
                  "attack": {"scenario": "weak", "strategy": {
                      "name": "stealthy_bias", "target_scale": 1.5, "safety": 0.9}}},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def make_config(overrides=None, preset=None):
    cfg = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[preset])
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}")
    base = path.parent
    graph = raw.get("graph", {})
    for key in ("edge_file", "positions_file"):
        if graph.get(key):
            p = Path(graph[key])
            graph[key] = str(p if p.is_absolute() else base / p)
    return make_config(raw, raw.pop("preset", None))


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class Scenario:
    """Everything a run needs, with every ``auto`` materialized."""

    config: dict
    graph: object
    spec: object
    param: Parameter
    attack: adv.AttackSpec
    params: EstimatorParams
    assignment: np.ndarray
    rho: float
    warnings: list = field(default_factory=list)


def _validate(cfg):
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    if int(cfg["horizon"]) < 1:
        raise ConfigError("horizon must be at least 1")
    if cfg["init"] not in ("zero", "truth"):
        raise ConfigError("init must be 'zero' or 'truth'")
    s = int(cfg["sectors_per_side"])
    if s < 1 or s % 2 == 0:
        raise ConfigError("sectors_per_side must be a positive odd integer")
    if float(cfg["noise_var"]) < 0:
        raise ConfigError("noise_var must be nonnegative")
    scen = cfg["attack"].get("scenario", "none")
    if scen not in ("none", "strong", "weak", "custom"):
        raise ConfigError(f"unknown attack scenario {scen!r}")


def _build_graph(cfg):
    g = cfg["graph"]
    if g.get("edge_file"):
        for key in ("edge_file", "positions_file"):
            if g.get(key) and not Path(g[key]).exists():
                raise ConfigError(f"graph file not found: {g[key]}")
        if not g.get("positions_file"):
            raise ConfigError("a graph file needs positions_file to assign sectors")
        graph = read_graph(g["edge_file"], g["positions_file"])
        return graph, None
    seed = derive_seed(cfg["seed"], TAG_GRAPH) if g.get("seed") is None else int(g["seed"])
    s = int(cfg["sectors_per_side"])
    retries = int(g.get("max_retries", 100))
    # sector coverage is needed for global observability, so redraw on empty sectors too
    for cand in range(seed, seed + retries + 1):
        graph = random_geometric_graph(int(g["n"]), float(g["side"]), float(g["radius"]), cand)
        cover = np.unique(sector_assignment(graph.positions, float(g["side"]), s))
        if is_connected(graph) and cover.size == s * s:
            return graph, cand
    raise ConfigError(
        f"no connected graph covering all {s * s} sectors for seeds {seed}..{seed + retries}")


def _strategy(strat, theta, sectors):
    if strat is None:
        return None
    strat = dict(strat)
    if strat.get("name") == "stealthy_bias":
        comp = strat.get("component")
        if comp is None:
            comp = (sectors // 2) * sectors + sectors // 2
        scale = strat.pop("target_scale", None)
        target = strat.get("target")
        if scale is not None and target is None:
            target = float(scale * theta[comp])
        return adv.StealthyBias(int(comp), float(strat.get("direction", 1.0)),
                                None if target is None else float(target),
                                float(strat.get("safety", adv.DEFAULT_SAFETY)))
    return adv.AttackSpec.from_dict({"compromised": [0], "strategy": strat}).strategy


def resolve(cfg):
    """Materialize a config into a :class:`Scenario`.

    ``scenario.config`` is the resolved config: replaying it yields the same run.
    """
    cfg = make_config(cfg)
    _validate(cfg)
    graph, graph_seed = _build_graph(cfg)
    s = int(cfg["sectors_per_side"])
    m = s * s
    side = float(cfg["graph"].get("side", 2000.0))
    assignment = sector_assignment(graph.positions, side, s)
    spec = sector_selector_spec(m, assignment, float(cfg["noise_var"]))

    th = cfg["theta"]
    if "values" in th:
        values = np.asarray(th["values"], dtype=np.float64)
        if values.size != m:
            raise ConfigError(f"theta has {values.size} values, expected {m}")
        eta = float(th.get("eta", np.linalg.norm(values)))
        param = Parameter(values, eta)
    else:
        param = sample_parameter(m, float(th["low"]), float(th["high"]), derive_seed(cfg["seed"], TAG_THETA))

    est = dict(cfg["estimator"])
    eta = param.eta if est.get("eta", "auto") == "auto" else float(est["eta"])
    lap = laplacian(graph)
    warnings = []
    gain_keys = ("alpha", "beta", "r1")
    if any(est.get(k, "auto") == "auto" for k in gain_keys):
        if not is_connected(graph) or not is_globally_observable(spec.h_list):
            raise ConfigError("automatic gains need a connected, globally observable network")
        a, b, r1, rho = choose_gains(lap, spec.h_list, m)
        auto = {"alpha": a, "beta": b, "r1": r1}
        for k in gain_keys:
            if est.get(k, "auto") == "auto":
                est[k] = auto[k]
    rho = spectral_radius(lap, spec.h_list, float(est["alpha"]), float(est["beta"]))
    if rho >= 1.0:
        warnings.append(f"gains alpha={est['alpha']}, beta={est['beta']} give spectral radius {rho:.6f} >= 1")
    try:
        params = EstimatorParams(float(est["alpha"]), float(est["beta"]), float(est["big_k"]),
                                 float(est["tau"]), float(est["r1"]), eta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    att = cfg["attack"]
    scen = att.get("scenario", "none")
    strategy = _strategy(att.get("strategy"), param.theta, s)
    try:
        if scen == "none":
            attack = adv.NO_ATTACK
        elif scen == "strong":
            attack = adv.scenario_strong(graph, assignment, s, strategy)
        elif scen == "weak":
            attack = adv.scenario_weak(graph, assignment, s, spec.h_list,
                                       derive_seed(cfg["seed"], TAG_ATTACK_SET), strategy)
        else:
            attack = adv.AttackSpec(frozenset(att.get("compromised", ())), strategy)
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from exc
    if any(not 0 <= n < graph.node_count for n in attack.compromised):
        raise ConfigError("compromised node index out of range")

    resolved = copy.deepcopy(cfg)
    if graph_seed is not None:
        resolved["graph"]["seed"] = graph_seed
    resolved["theta"] = {"values": param.theta.tolist(), "eta": param.eta}
    resolved["estimator"] = {"alpha": params.alpha, "beta": params.beta, "r1": params.r1,
                             "big_k": params.big_k, "tau": params.tau, "eta": params.eta}
    resolved["attack"] = {"scenario": "custom", **attack.to_dict(), "source_scenario": scen}
    resolved["resolved"] = {"spectral_radius": rho, "gamma0": 2 * eta * math.sqrt(graph.node_count)}
    return Scenario(resolved, graph, spec, param, attack, params, assignment, rho, warnings)
