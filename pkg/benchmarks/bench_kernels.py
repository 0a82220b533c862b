#!/usr/bin/env python3
"""Time the hot kernels on both lanes: numba-jitted vs pure numpy.

Runs itself twice: once in the current process (default lane) and once in a
subprocess with RESLEARN_PURE_NUMPY=1. Compile time is excluded by a warmup
call before timing.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def bench_lane(repeat: int) -> dict:
    from reslearn._backend import USING_NUMBA
    from reslearn.models import PredictorConfig, build_predictor
    from reslearn.synth import TraceSpec, gen_trace
    from reslearn.viewframe import Thresholds, identify_frames

    rng = np.random.default_rng(0)
    results = {"lane": "numba" if USING_NUMBA else "numpy"}

    # recurrent forward+backward over long windows
    X = rng.uniform(0, 1, (256, 64))
    y = rng.uniform(0, 1, 256)
    for kind in ("lstm", "gru", "stacked_lstm"):
        model = build_predictor(PredictorConfig(kind=kind, lookback=64, hidden_width=64))
        model.loss_and_grad(X, y)  # warmup / compile
        t0 = time.perf_counter()
        for _ in range(repeat):
            model.loss_and_grad(X, y)
        results[kind] = (time.perf_counter() - t0) / repeat

    # frame identification scan over a long trace
    packets, _ = gen_trace(TraceSpec(duration=60.0, background_rate=500.0))
    th = Thresholds(len_th=300.0, dur_th=0.002)
    identify_frames(packets, th)  # warmup / compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        identify_frames(packets, th)
    results["identify_frames"] = (time.perf_counter() - t0) / repeat
    return results


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--lane-only", action="store_true",
                        help="benchmark only the current lane and print JSON")
    args = parser.parse_args()

    if args.lane_only:
        print(json.dumps(bench_lane(args.repeat)))
        return 0

    here = bench_lane(args.repeat)
    env = dict(os.environ, RESLEARN_PURE_NUMPY="1")
    proc = subprocess.run(
        [sys.executable, __file__, "--lane-only", "--repeat", str(args.repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    other = json.loads(proc.stdout.strip().splitlines()[-1])

    lanes = {here["lane"]: here, other["lane"]: other}
    if "numba" not in lanes or "numpy" not in lanes:
        print("both runs used the same lane; is numba installed?", file=sys.stderr)
        return 1
    print(f"{'kernel':<18}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for key in ("lstm", "gru", "stacked_lstm", "identify_frames"):
        tn, tp = lanes["numba"][key], lanes["numpy"][key]
        print(f"{key:<18}{tn:>12.5f}{tp:>12.5f}{tp / tn:>9.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
