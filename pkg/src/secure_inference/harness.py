"""Scenario execution, outcome classification, Monte-Carlo runs and outputs."""

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp

from . import adversary as adv
from .config import resolve, save_config
from .rng import TAG_ADVERSARY, TAG_NOISE, NoiseStream, derive_seed

log = logging.getLogger(__name__)

CONVERGED = "Converged"
DETECTED = "Detected"
MISSED_AND_WRONG = "MissedAndWrong"

TRACE_HEADER = ["t", "node", "error", "flag"]


@dataclass
class ScenarioResult:
    config: dict
    errors: np.ndarray          # (T+1, N): |x_n(t) - theta|
    flags: np.ndarray           # (T+1, N): 0/1
    gamma: np.ndarray           # (T+1,)
    max_distance: np.ndarray    # (T,): largest distance any uncompromised node checked at t
    final_x: np.ndarray         # (N, m)
    theta: np.ndarray
    compromised: frozenset
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def uncompromised(self):
        return [n for n in range(self.errors.shape[1]) if n not in self.compromised]


def summarize(errors, flags, theta_norm, compromised, threshold=0.05):
    """Outcome and per-node metrics from a trace alone.

    A run is ``Detected`` if any uncompromised node ever raised its flag,
    otherwise ``Converged`` when every uncompromised relative error at the
    horizon is below ``threshold``, otherwise ``MissedAndWrong``.
    """
    errors = np.asarray(errors)
    flags = np.asarray(flags)
    n = errors.shape[1]
    honest = np.array([k for k in range(n) if k not in compromised], dtype=int)
    detection = []
    for k in range(n):
        hit = np.flatnonzero(flags[:, k])
        detection.append(int(hit[0]) if hit.size else None)
    rel = errors[-1] / theta_norm if theta_norm > 0 else errors[-1]
    detected = bool(flags[:, honest].any()) if honest.size else False
    max_rel = float(rel[honest].max()) if honest.size else 0.0
    converged = max_rel < threshold
    if detected:
        outcome = DETECTED
    elif converged:
        outcome = CONVERGED
    else:
        outcome = MISSED_AND_WRONG
    times = [detection[k] for k in honest if detection[k] is not None]
    return {
        "outcome": outcome,
        "detected": detected,
        "converged": converged,
        "false_alarm": detected and not compromised,
        "max_relative_error": max_rel,
        "first_detection": min(times) if times else None,
        "n_flagged": len(times),
        "detection_time": detection,
        "final_relative_error": rel.tolist(),
    }


def run_scenario(config):
    """Synchronous rounds ``t = 0 .. T-1`` of broadcast, update, detect.

    Uncompromised agents start at ``x = 0`` (or ``theta`` with
    ``init="truth"``).  Compromised agents broadcast according to their
    strategy; under :class:`~secure_inference.adversary.MeasurementOffset`
    they run the honest update on falsified measurements instead.
    """
    start = time.perf_counter()
    scen = resolve(config)
    cfg = scen.config
    for w in scen.warnings:
        log.warning(w)
    g, spec, p = scen.graph, scen.spec, scen.params
    n, m = g.node_count, spec.m
    theta = scen.param.theta
    horizon = int(cfg["horizon"])
    attack = scen.attack

    adj = sp.csr_matrix(g.adjacency())
    deg = np.asarray(adj.sum(axis=1)).ravel()[:, None]
    h_stack = spec.stacked_h()
    h_stack_t = h_stack.T.tocsr()
    factor = spec.noise_factor()
    clean = h_stack @ np.tile(theta, n)
    noiseless = factor.nnz == 0 or not np.any(factor.data)
    noise = NoiseStream(derive_seed(cfg["seed"], TAG_NOISE))
    adv_seed = derive_seed(cfg["seed"], TAG_ADVERSARY)

    false_bcast = sorted(attack.compromised) if attack.broadcasts_falsely() else []
    is_false = np.zeros(n, dtype=bool)
    is_false[false_bcast] = True
    honest = np.array([k for k in range(n) if k not in attack.compromised], dtype=int)
    nbrs = g.neighbors()
    honest_view = {a: [l for l in nbrs[a] if l not in attack.compromised] for a in false_bcast}

    offsets = np.zeros(int(spec.offsets[-1]))
    if isinstance(attack.strategy, adv.MeasurementOffset):
        for a in attack.compromised:
            offsets[spec.rows_of(a)] = np.asarray(attack.strategy.offset, dtype=np.float64)

    # directed checks (receiver, sender) for every uncompromised receiver
    e = g.edge_array
    pairs = np.concatenate([e, e[:, ::-1]]) if e.size else np.zeros((0, 2), dtype=int)
    keep = ~np.isin(pairs[:, 0], list(attack.compromised))
    recv, send = pairs[keep, 0], pairs[keep, 1]

    x = np.zeros((n, m)) if cfg["init"] == "zero" else np.tile(theta, (n, 1))
    ybar = np.zeros_like(clean)
    flag = np.zeros(n, dtype=np.int8)
    gamma = 2.0 * p.eta * math.sqrt(n)

    errors = np.empty((horizon + 1, n))
    flags = np.empty((horizon + 1, n), dtype=np.int8)
    gammas = np.empty(horizon + 1)
    max_dist = np.zeros(horizon)

    updating = np.ones(n, dtype=bool)
    updating[false_bcast] = False

    for t in range(horizon):
        errors[t] = np.sqrt(((x - theta) ** 2).sum(axis=1))
        flags[t] = flag
        gammas[t] = gamma

        y = clean + offsets
        if not noiseless:
            y = y + factor @ noise.standard_normal(t, y.size)
        ybar = y if t == 0 else (t / (t + 1)) * ybar + (1.0 / (t + 1)) * y

        bcast = x.copy()
        for a in false_bcast:
            view = x[honest_view[a]]
            bcast[a] = adv.byzantine_broadcast(attack.strategy, view, gamma, t, adv_seed,
                                               own_state=x[a], node=a)

        if recv.size:
            dist = np.sqrt(((x[recv] - bcast[send]) ** 2).sum(axis=1))
            max_dist[t] = dist.max()
            hit = recv[dist > gamma]
            if hit.size:
                flag[hit] = 1

        innov = (h_stack_t @ (ybar - h_stack @ x.ravel())).reshape(n, m)
        x_next = x - p.beta * (deg * x - adj @ bcast) + p.alpha * innov
        x = np.where(updating[:, None], x_next, bcast)
        gamma = (1.0 - p.r1) * gamma + p.alpha * 2.0 * p.big_k / (t + 1) ** p.tau

    errors[horizon] = np.sqrt(((x - theta) ** 2).sum(axis=1))
    flags[horizon] = flag
    gammas[horizon] = gamma

    summary = summarize(errors, flags, float(np.linalg.norm(theta)), attack.compromised,
                        float(cfg["convergence_threshold"]))
    result = ScenarioResult(cfg, errors, flags, gammas, max_dist, x, theta, attack.compromised, summary,
                            list(scen.warnings))
    result.elapsed = time.perf_counter() - start
    return result


def _run_summary_row(args):
    config, seed = args
    cfg = dict(config)
    cfg["seed"] = int(seed)
    res = run_scenario(cfg)
    s = res.summary
    honest = res.uncompromised
    times = [s["detection_time"][k] for k in honest if s["detection_time"][k] is not None]
    rel = np.asarray(s["final_relative_error"])[honest]
    return {
        "seed": int(seed),
        "outcome": s["outcome"],
        "detected": s["detected"],
        "converged": s["converged"],
        "false_alarm": s["false_alarm"],
        "first_detection": s["first_detection"],
        "mean_detection_time": float(np.mean(times)) if times else float("nan"),
        "n_flagged": s["n_flagged"],
        "max_relative_error": s["max_relative_error"],
        "median_relative_error": float(np.median(rel)) if rel.size else float("nan"),
        "n_compromised": len(res.compromised),
        "elapsed_s": res.elapsed,
    }


def run_monte_carlo(config, seeds, workers=1):
    """One :func:`run_scenario` per seed.

    Returns ``(table, aggregate)``: a DataFrame with one row per seed (in the
    given order) and a dict of outcome counts and error quantiles.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    jobs = [(config, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_summary_row, jobs))
    else:
        rows = [_run_summary_row(j) for j in jobs]
    table = pd.DataFrame(rows)
    agg = aggregate(table)
    return table, agg


def aggregate(table):
    counts = table["outcome"].value_counts()
    errs = table["max_relative_error"].to_numpy()
    det = table["first_detection"].dropna().to_numpy(dtype=float)
    return {
        "runs": int(len(table)),
        "converged": int(counts.get(CONVERGED, 0)),
        "detected": int(counts.get(DETECTED, 0)),
        "missed_and_wrong": int(counts.get(MISSED_AND_WRONG, 0)),
        "false_alarms": int(table["false_alarm"].sum()),
        "mean_first_detection": float(det.mean()) if det.size else float("nan"),
        "max_relative_error_q50": float(np.quantile(errs, 0.5)),
        "max_relative_error_q90": float(np.quantile(errs, 0.9)),
        "max_relative_error_max": float(errs.max()),
    }


def trace_frame(result):
    t_len, n = result.errors.shape
    return pd.DataFrame({
        "t": np.repeat(np.arange(t_len), n),
        "node": np.tile(np.arange(n), t_len),
        "error": result.errors.ravel(),
        "flag": result.flags.ravel().astype(int),
    })[TRACE_HEADER]


def read_trace(path):
    """Load a trace CSV back into ``(errors, flags)`` arrays of shape (T+1, N)."""
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != TRACE_HEADER:
        raise ValueError(f"{path}: expected header {TRACE_HEADER}, got {list(df.columns)}")
    if df.empty:
        return np.zeros((0, 0)), np.zeros((0, 0), dtype=np.int8)
    t_len, n = int(df["t"].max()) + 1, int(df["node"].max()) + 1
    errors = np.full((t_len, n), np.nan)
    flags = np.zeros((t_len, n), dtype=np.int8)
    errors[df["t"].to_numpy(), df["node"].to_numpy()] = df["error"].to_numpy()
    flags[df["t"].to_numpy(), df["node"].to_numpy()] = df["flag"].to_numpy()
    return errors, flags


def write_trace(result, path):
    trace_frame(result).to_csv(path, index=False, float_format="%.17g")


def summary_frame(result):
    s = result.summary
    n = result.errors.shape[1]
    return pd.DataFrame({
        "node": np.arange(n),
        "compromised": [int(k in result.compromised) for k in range(n)],
        "detection_time": pd.array(s["detection_time"], dtype="Int64"),
        "final_error": result.errors[-1],
        "final_relative_error": s["final_relative_error"],
    })


def outcome_frame(result):
    s = result.summary
    return pd.DataFrame([{
        "outcome": s["outcome"],
        "detected": int(s["detected"]),
        "converged": int(s["converged"]),
        "false_alarm": int(s["false_alarm"]),
        "max_relative_error": s["max_relative_error"],
        "first_detection": s["first_detection"] if s["first_detection"] is not None else "",
        "n_flagged": s["n_flagged"],
    }])


def emit_outputs(result, out_dir, plots=True):
    """Write ``config.json``, ``trace.csv``, ``summary.csv``, ``outcome.csv`` and plots."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_config(result.config, out / "config.json")
        write_trace(result, out / "trace.csv")
        summary_frame(result).to_csv(out / "summary.csv", index=False, float_format="%.17g")
        outcome_frame(result).to_csv(out / "outcome.csv", index=False, float_format="%.17g")
    except OSError as exc:
        raise OSError(f"could not write outputs to {out}: {exc}") from exc
    written = [out / f for f in ("config.json", "trace.csv", "summary.csv", "outcome.csv")]
    if plots:
        from .plotting import plot_result

        written += plot_result(result, out)
    return written


def empty_result(config):
    """Result with no rounds recorded; used for header-only traces."""
    return ScenarioResult(config, np.zeros((0, 0)), np.zeros((0, 0), dtype=np.int8), np.zeros(0), np.zeros(0),
                          np.zeros((0, 0)), np.zeros(0), frozenset())


def worker_count():
    return max(1, min(os.cpu_count() or 1, 8))
