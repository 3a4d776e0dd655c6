"""Compare the numba and numpy backends of the hot kernels.

Each backend runs in its own interpreter, because the backend is fixed at
import time by ``ANOSOV_DISABLE_NUMBA``.  Reported times are the best of
``--repeat`` runs after one warm-up call (which absorbs JIT compilation).

    python3 benchmarks/bench_kernels.py [--repeat 5] [--L 9]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from anosov import _kernels
from anosov.dynamics import divergence_scan, fixture_path, load_representation

L, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
mats = rng.standard_normal((200_000, 3, 3))
logs = np.zeros(len(mats))
gens = rng.standard_normal((4, 3, 3))
parent = rng.integers(0, len(mats), len(mats))
letters = rng.integers(0, 4, len(mats))
pts = rng.standard_normal((4000, 3))
pts /= np.linalg.norm(pts, axis=1)[:, None]
rep = load_representation(fixture_path("schottky_k2_t3.json"))

cases = {
    "extend_level": lambda: _kernels.extend_level(mats, logs, parent, letters, gens),
    "log_top_singular": lambda: _kernels.log_top_singular(mats[:50_000]),
    "dedup_lines": lambda: _kernels.dedup_lines(pts, 1e-6),
    "divergence_scan": lambda: divergence_scan(rep, L=L),
}
out = {"backend": _kernels.BACKEND, "times": {}}
for name, fn in cases.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out["times"][name] = best
print(json.dumps(out))
"""


def run(disable, L, repeat):
    env = dict(os.environ, ANOSOV_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(L), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--L", type=int, default=9)
    args = ap.parse_args(argv)
    fast = run(False, args.L, args.repeat)
    slow = run(True, args.L, args.repeat)
    print(f"{'kernel':<20}{fast['backend'] + ' [s]':>14}{slow['backend'] + ' [s]':>14}{'speedup':>10}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<20}{t_fast:>14.4f}{t_slow:>14.4f}{t_slow / t_fast:>9.2f}x")


if __name__ == "__main__":
    main()
