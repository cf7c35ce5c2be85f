"""Compare decoder backends: batch throughput and single-frame latency.

Run:  python3 benchmarks/bench_backends.py [--frames 20000] [--p 0.2]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from drew import ecc
from drew.backends import available_backends, set_backend
from drew.rng import substream


def _workload(spec, frames: int, p: float):
    rng = substream(1234, f"bench/p={p!r}")
    msgs = rng.integers(0, 1 << spec.k, size=frames)
    keys = ecc.encode_all(spec)[msgs]
    keys = keys ^ (rng.random(keys.shape) < p).astype(np.uint8)
    return msgs, ecc.llr_from_keys(spec, keys, spec.design_p)


def _time_batch(spec, llrs, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        ecc.decode_batch(spec, llrs)
        best = min(best, time.perf_counter() - t0)
    return best


def _time_single(spec, llrs, count: int = 200) -> float:
    t0 = time.perf_counter()
    for i in range(count):
        ecc.decode(spec, llrs[i % len(llrs)])
    return (time.perf_counter() - t0) / count


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--design-p", type=float, default=0.1)
    ap.add_argument("--frames", type=int, default=20000)
    ap.add_argument("--p", type=float, default=0.2, help="channel flip rate")
    args = ap.parse_args()

    spec = ecc.construct_code(args.k, args.n, args.design_p)
    msgs, llrs = _workload(spec, args.frames, args.p)

    print(f"spec: k={spec.k} n={spec.n} block_len={spec.block_len} "
          f"design_p={spec.design_p}  frames={args.frames}  p={args.p}")
    print(f"available backends: {', '.join(available_backends())}")
    header = f"{'backend':8s} {'batch (s)':>10s} {'frames/s':>12s} {'single (us)':>12s}"
    print(header)
    print("-" * len(header))

    results = {}
    for name in available_backends():
        set_backend(name)
        codes, _, _, _, _ = ecc.decode_batch(spec, llrs)  # warm-up (and jit)
        results[name] = ecc.codes_to_ints(codes)
        batch = _time_batch(spec, llrs)
        single = _time_single(spec, llrs)
        print(f"{name:8s} {batch:10.4f} {args.frames / batch:12.0f} {single * 1e6:12.1f}")

    names = list(results)
    for a, b in zip(names, names[1:]):
        same = np.array_equal(results[a], results[b])
        print(f"decoded outputs {a} == {b}: {same}")
        if not same:
            raise SystemExit("backend outputs disagree")


if __name__ == "__main__":
    main()
