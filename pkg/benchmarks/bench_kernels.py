"""Time the jitted kernels against their numpy/python fallbacks.

Run ``python benchmarks/bench_kernels.py``.  The full-scenario row runs in a
subprocess with ``PRIVAGG_NO_JIT=1`` so the fallback is measured end to end.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from privagg.kernels.fleet import FLEET, NUMPY
from privagg.sim.config import ScenarioConfig
from privagg.sim.runner import run_scenario

SCENARIO = ("from privagg.sim.config import ScenarioConfig; from privagg.sim.runner import run_scenario;"
            "r = run_scenario(ScenarioConfig(households={N}, horizon={H}), metrics=False); print(r.wall_clock)")


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_rows(N, m, n, K, repeat):
    rng = np.random.default_rng(0)
    edges = np.sort(rng.uniform(0, 5, (N, m + 1)), axis=1)
    values = rng.uniform(0, 5, N)
    counts = rng.uniform(0, 20, (N, m, n))
    istar = rng.integers(0, m, N)
    D = K + 1 + 0.1 * m * n
    rows = []
    for name, call in [
        ("quantize_rows", lambda k: k.quantize_rows(values, edges)),
        ("proxy_rows", lambda k: k.proxy_rows(counts, istar, 0.1, D)),
    ]:
        for k in (FLEET, NUMPY):
            call(k)  # compile
        rows.append((name, best_of(lambda: [call(FLEET) for _ in range(100)], repeat) / 100,
                     best_of(lambda: [call(NUMPY) for _ in range(100)], repeat) / 100))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--households", type=int, default=20)
    ap.add_argument("--horizon", type=float, default=3600.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':<16}{'jit [s]':>12}{'fallback [s]':>14}{'speedup':>9}")
    for name, jit, ref in kernel_rows(args.households, 15, 15, 901, args.repeat):
        print(f"{name:<16}{jit:>12.2e}{ref:>14.2e}{ref / jit:>9.1f}")
    cfg = ScenarioConfig(households=args.households, horizon=args.horizon)
    run_scenario(cfg.with_(horizon=300.0, discard=0.0), metrics=False)  # compile
    jit = run_scenario(cfg, metrics=False).wall_clock
    code = SCENARIO.format(N=args.households, H=args.horizon)
    out = subprocess.run([sys.executable, "-c", code], env=dict(os.environ, PRIVAGG_NO_JIT="1"),
                         capture_output=True, text=True, check=True)
    ref = float(out.stdout.split()[-1])
    print(f"{'scenario':<16}{jit:>12.2f}{ref:>14.2f}{ref / jit:>9.1f}")


if __name__ == "__main__":
    main()
