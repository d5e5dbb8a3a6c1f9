"""Command-line interface.

Exit codes: 0 on success, 1 on configuration or input errors, 2 on runtime
errors.  Set ``SECURE_INFERENCE_LOG`` (DEBUG, INFO, WARNING, ...) for log
verbosity.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import centralized as cz
from .config import ConfigError, load_config, make_config, save_config
from .consensus import run_consensus_experiment
from .harness import emit_outputs, run_monte_carlo, run_scenario
from .topology import (Graph, connected_geometric_graph, is_connected, laplacian, random_geometric_graph,
                       read_graph, write_graph)

log = logging.getLogger("secure_inference")


def _seed_range(text):
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in text.split(",") if s]


def _config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = make_config(preset=args.preset or "desk_no_adversary")
    if args.horizon is not None:
        cfg["horizon"] = args.horizon
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def cmd_simulate(args):
    result = run_scenario(_config(args))
    emit_outputs(result, args.out, plots=not args.no_plots)
    s = result.summary
    print(f"{result.config['name']}: outcome={s['outcome']} max_relative_error={s['max_relative_error']:.3e} "
          f"first_detection={s['first_detection']} ({result.elapsed:.1f} s) -> {args.out}")


def cmd_mc(args):
    cfg = _config(args)
    table, agg = run_monte_carlo(cfg, _seed_range(args.seeds), workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    table.to_csv(out / "runs.csv", index=False, float_format="%.17g")
    pd.DataFrame([agg]).to_csv(out / "aggregate.csv", index=False, float_format="%.17g")
    print(json.dumps(agg, indent=2))


def cmd_graph(args):
    if args.graph_cmd == "gen":
        if args.connected:
            g, used = connected_geometric_graph(args.n, args.side, args.radius, args.seed)
        else:
            g, used = random_geometric_graph(args.n, args.side, args.radius, args.seed), args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_graph(g, out / "edges.txt", out / "positions.csv")
        print(f"nodes={g.node_count} edges={len(g.edges)} seed={used} connected={is_connected(g)}")
    else:
        g = read_graph(args.edges, args.positions)
        lam = np.linalg.eigvalsh(laplacian(g))
        lam2 = float(lam[1]) if lam.size > 1 else 0.0
        print(f"nodes={g.node_count} edges={len(g.edges)} connected={is_connected(g)} "
              f"lambda2={lam2:.6g} lambda_max={float(lam[-1]):.6g}")


def _read_vector_csv(path):
    df = pd.read_csv(path, float_precision="round_trip")
    if {"row_index", "y_value"} - set(df.columns):
        raise ConfigError(f"{path}: expected columns row_index,y_value")
    return df.sort_values("row_index")["y_value"].to_numpy(dtype=np.float64)


def _read_matrix_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))


def cmd_detect(args):
    model = cz.CentralModel(_read_matrix_csv(args.h), args.tau)
    y = _read_vector_csv(args.y)
    theta = cz.ls_estimate(model, y)
    res = cz.residual(model, y)
    alarm = res > model.tau_detect
    rec = {"alarm": int(alarm), "residual": res, "tau": model.tau_detect,
           "theta_hat": " ".join(repr(float(v)) for v in theta)}
    _emit_record(rec, args.out)
    print(f"alarm={alarm} residual={res:.6g} tau={model.tau_detect:.6g}")


def cmd_identify(args):
    model = cz.CentralModel(_read_matrix_csv(args.h))
    y = _read_vector_csv(args.y)
    if args.method == "l0":
        r = cz.identify_l0(model, y, args.s_max, eps=args.eps)
    else:
        r = cz.identify_l1(model, y)
    rec = {"method": args.method, "support": " ".join(map(str, r.support)),
           "theta_tilde": " ".join(repr(float(v)) for v in r.theta_tilde),
           "a_tilde": " ".join(repr(float(v)) for v in r.a_tilde)}
    _emit_record(rec, args.out)
    print(f"support={list(r.support)} theta_tilde={np.array2string(r.theta_tilde, precision=6)}")


def _emit_record(rec, out):
    if out:
        pd.DataFrame([rec]).to_csv(out, index=False, float_format="%.17g")


def cmd_consensus(args):
    if args.edges:
        g = read_graph(args.edges, args.positions)
    elif args.complete:
        g = Graph(args.n, tuple((i, j) for i in range(args.n) for j in range(i + 1, args.n)))
    else:
        g, _ = connected_geometric_graph(args.n, args.side, args.radius, args.seed)
    byz = [int(b) for b in args.byzantine.split(",") if b] if args.byzantine else []
    rel = [int(b) for b in args.reliable.split(",") if b] if args.reliable else []
    traj, target = run_consensus_experiment(args.algo, g, args.steps, args.seed, args.f, byz, rel)
    err = np.abs(traj - target)
    t_len, n = err.shape
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"t": np.repeat(np.arange(t_len), n), "node": np.tile(np.arange(n), t_len),
                  "error": err.ravel(), "flag": 0}).to_csv(out / "trace.csv", index=False, float_format="%.17g")
    normal = [k for k in range(n) if k not in byz]
    print(f"{args.algo}: max final error over non-Byzantine nodes = {err[-1, normal].max():.3e}")


def build_parser():
    p = argparse.ArgumentParser(prog="secure-inference", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def scenario_args(sp):
        sp.add_argument("--config", help="scenario JSON file")
        sp.add_argument("--preset", help="built-in preset when no --config is given")
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("simulate", help="run one scenario")
    scenario_args(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-plots", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("mc", help="Monte-Carlo runs over a seed range")
    scenario_args(sp)
    sp.add_argument("--seeds", required=True, help="a..b (inclusive) or comma list")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("graph", help="generate or check a graph")
    gsub = sp.add_subparsers(dest="graph_cmd", required=True)
    gg = gsub.add_parser("gen")
    gg.add_argument("--n", type=int, default=50)
    gg.add_argument("--side", type=float, default=2000.0)
    gg.add_argument("--radius", type=float, default=600.0)
    gg.add_argument("--seed", type=int, default=0)
    gg.add_argument("--connected", action="store_true", help="retry seed+1, ... until connected")
    gg.add_argument("--out", required=True)
    gc = gsub.add_parser("check")
    gc.add_argument("--edges", required=True)
    gc.add_argument("--positions")
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("detect", help="centralized residual detector")
    sp.add_argument("--y", required=True, help="CSV with row_index,y_value")
    sp.add_argument("--h", required=True, help="CSV of the measurement matrix")
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("identify", help="sparse attack identification")
    sp.add_argument("--y", required=True)
    sp.add_argument("--h", required=True)
    sp.add_argument("--method", choices=("l0", "l1"), default="l0")
    sp.add_argument("--s-max", type=int, default=1)
    sp.add_argument("--eps", type=float, default=1e-8)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("consensus", help="run a consensus variant")
    sp.add_argument("--algo", choices=("avg", "wmsr", "leblanc", "adaptive"), required=True)
    sp.add_argument("--edges")
    sp.add_argument("--positions")
    sp.add_argument("--complete", action="store_true")
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--side", type=float, default=2000.0)
    sp.add_argument("--radius", type=float, default=900.0)
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--f", type=int, default=1)
    sp.add_argument("--byzantine", help="comma-separated node ids")
    sp.add_argument("--reliable", help="comma-separated node ids (leblanc)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_consensus)
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("SECURE_INFERENCE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError, cz.RankDeficientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
