"""Compare the numba and pure-numpy kernel backends.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``. Each backend runs
in a fresh interpreter because the backend is fixed at import time.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from cauchylab import disk2d, elliptic1d, kernels

t0 = time.perf_counter()
elliptic1d.kernel_basis(elliptic1d.OperatorSpec1D.scalar([0.0], [0.0], [-1.0]))
disk2d.radial_solution(1, (0.0,), 1.0)
first = time.perf_counter() - t0

rng = np.random.default_rng(0)
specs = [elliptic1d.random_elliptic_spec(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3))) for _ in range(REPEAT)]
t0 = time.perf_counter()
for A in specs:
    elliptic1d.kernel_basis(A)
t1d = time.perf_counter() - t0
t0 = time.perf_counter()
disk2d.dtn_map(disk2d.RadialOperatorSpec((0.0,), 5.0, REPEAT))
tdisk = time.perf_counter() - t0
print(json.dumps({"backend": kernels.BACKEND, "first_call_s": first, "kernel_basis_s": t1d, "dtn_map_s": tdisk}))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("CAUCHYLAB_DISABLE_NUMBA", None)
    if disable:
        env["CAUCHYLAB_DISABLE_NUMBA"] = "1"
    code = WORKLOAD.replace("REPEAT", str(repeat))
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=50, help="operators / modes per workload")
    args = parser.parse_args(argv)
    rows = [run(False, args.repeat), run(True, args.repeat)]
    print(f"{'backend':8s} {'first call':>11s} {'kernel_basis':>13s} {'dtn_map':>9s}")
    for r in rows:
        print(f"{r['backend']:8s} {r['first_call_s']:10.3f}s {r['kernel_basis_s']:12.3f}s {r['dtn_map_s']:8.3f}s")
    fast, slow = rows
    print(f"speed-up: kernel_basis x{slow['kernel_basis_s'] / fast['kernel_basis_s']:.1f}, "
          f"dtn_map x{slow['dtn_map_s'] / fast['dtn_map_s']:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
