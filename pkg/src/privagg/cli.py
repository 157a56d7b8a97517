"""Command-line entry point: ``privagg <command> ...``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .aggregator import generate_day_ahead, generate_target, write_series_csv
from .metrics import evaluate
from .sim.config import ScenarioConfig, load_config
from .sim.ingest import ingest_traces, load_trace, write_trace_csv
from .sim.results import emit_results, read_traces
from .sim.runner import build_scenario, run_benchmark, run_scenario

RESOLUTIONS = {"1s": 1, "1m": 60, "5m": 300}


def _config(path) -> ScenarioConfig:
    return load_config(path) if path else ScenarioConfig()


def _run(args, runner):
    cfg = _config(args.config)
    out = args.out or cfg.out_dir
    res = runner(cfg)
    paths = emit_results(res, out, svg=cfg.svg)
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(asdict(cfg), fh, indent=2)
        fh.write("\n")
    rep = res.report()
    print(f"{res.mode}: {res.ticks} ticks in {res.wall_clock:.2f} s; NRMSE {rep.nrmse:.3f}%  MAPE {rep.mape:.3f}%  "
          f"NMAE {rep.average('nmae'):.3f}%  I_iid {rep.average('i_iid'):.3f} bits")
    for p in paths:
        print(f"  wrote {p}")
    return 0


def cmd_metrics(args):
    tr = read_traces(args.traces)
    factor = RESOLUTIONS[args.resolution]
    k = args.discard
    if tr["tick"].size <= k:
        raise ValueError(f"traces have {tr['tick'].size} ticks, discard is {k}")
    rep = evaluate(tr["x"][:, k:], tr["y"][:, k:], tr["yref"][:, k:], tr["y_hat"][k:], tr["y_bar"][k:], factor,
                   args.m, args.n)
    if args.out.endswith(".csv"):
        rep.to_csv(args.out)
    else:
        rep.to_json(args.out)
    print(f"NRMSE {rep.nrmse:.3f}%  I_iid {rep.average('i_iid'):.3f} bits  -> {args.out}")
    return 0


def cmd_gen_target(args):
    cfg = _config(args.config)
    sc = build_scenario(cfg)
    base = np.sum([h.day_ahead for h in sc.households], axis=0)
    prof = generate_target(base, cfg.households * cfg.reserve, cfg.target_dt, args.seed, horizon=cfg.horizon,
                           correlation_time=cfg.correlation_time)
    if args.out:
        write_series_csv(args.out, prof.values)
    else:
        _stdout_series(prof.values)
    return 0


def _stdout_series(values):
    w = sys.stdout
    w.write("tick,kW\n")
    for k, v in enumerate(values):
        w.write(f"{k},{float(v)!r}\n")


def cmd_gen_schedule(args):
    tr = load_trace(args.trace)
    sched = generate_day_ahead(tr.values, dt=tr.dt)
    if args.out:
        write_series_csv(args.out, sched)
    else:
        _stdout_series(sched)
    return 0


def cmd_ingest(args):
    traces = ingest_traces(args.indir, args.n, args.seed)
    out = args.out or os.path.join(args.indir, "ingested")
    os.makedirs(out, exist_ok=True)
    for l, tr in enumerate(traces):
        write_trace_csv(os.path.join(out, f"household_{l:03d}.csv"), tr)
    print(f"wrote {len(traces)} traces to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privagg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "run the distributed controllers"),
                           ("benchmark", "run the full-information benchmark")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="TOML scenario file (defaults when omitted)")
        s.add_argument("--out", help="output directory (overrides [scenario] out_dir)")
    s = sub.add_parser("metrics", help="evaluate a traces.csv file")
    s.add_argument("--traces", required=True)
    s.add_argument("--resolution", choices=sorted(RESOLUTIONS), default="1s")
    s.add_argument("--out", required=True, help=".json or .csv report path")
    s.add_argument("--discard", type=int, default=1800, help="initial ticks excluded")
    s.add_argument("--m", type=int, default=15)
    s.add_argument("--n", type=int, default=15)
    s = sub.add_parser("gen-target", help="write a target profile as tick,kW CSV")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s = sub.add_parser("gen-schedule", help="half-hourly schedule of a timestamp,power trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--out")
    s = sub.add_parser("ingest", help="resample and replicate metered traces")
    s.add_argument("--in", dest="indir", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": lambda a: _run(a, run_scenario),
        "benchmark": lambda a: _run(a, run_benchmark),
        "metrics": cmd_metrics,
        "gen-target": cmd_gen_target,
        "gen-schedule": cmd_gen_schedule,
        "ingest": cmd_ingest,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"privagg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
