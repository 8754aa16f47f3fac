"""Timing comparison of the compiled and pure-NumPy compute paths.

The accelerated path is selected at import time via SWARMLIM_NO_NUMBA, so
each path runs in its own subprocess; the parent merges the timings.

Usage: python3 benchmarks/accel_bench.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _bench_worker(repeat: int) -> dict:
    import numpy as np

    from swarmlim import _accel
    from swarmlim.ensemble import MultiSpeciesState, SpeciesEnsemble
    from swarmlim.kernels import KernelMatrix, KernelSpec, assemble_field

    rng = np.random.default_rng(0)
    n_src, n_qry, d = 2048, 2048, 2
    state = MultiSpeciesState(
        time=0.0,
        species=(
            SpeciesEnsemble(
                positions=rng.standard_normal((n_src, d)),
                weights=np.full(n_src, 1.0 / n_src),
            ),
            SpeciesEnsemble(
                positions=rng.standard_normal((n_src, d)) + 1.5,
                weights=np.full(n_src, 1.0 / n_src),
            ),
        ),
    )
    matrix = KernelMatrix(
        entries=(
            (KernelSpec.gaussian(1.0, 1.0, 0.5, 0.5), KernelSpec.quadratic(0.3)),
            (KernelSpec.quadratic(0.3), KernelSpec.gaussian(0.8, 2.0, 0.0, 1.0)),
        ),
        dimension=d,
    )
    queries = rng.standard_normal((n_qry, d))

    ens0 = state.species[0]
    code, params = matrix.entries[0][0].packed()
    xa = np.sort(rng.standard_normal((64, 4096)), axis=1)
    xb = np.sort(rng.standard_normal((64, 4096)) + 0.3, axis=1)
    wa = np.full(4096, 1.0 / 4096)
    wb = np.full(4096, 1.0 / 4096)

    def time_best(fn) -> float:
        fn()  # warm-up (JIT compile on the accelerated path)
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        return best

    results = {
        "path": "numba" if _accel.USING_NUMBA else "numpy",
        "field_assembly": time_best(
            lambda: assemble_field(matrix, list(state.species), 0, queries)
        ),
        "pair_energy": time_best(
            lambda: _accel.pair_energy(
                ens0.positions, ens0.weights, ens0.positions, ens0.weights,
                code, params, True, False,
            )
        ),
        "w1_1d_batch": time_best(lambda: _accel.w1_1d_batch(xa, wa, xb, wb)),
    }
    return results


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(_bench_worker(args.repeat)))
        return 0

    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, SWARMLIM_NO_NUMBA=disable)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    names = ("field_assembly", "pair_energy", "w1_1d_batch")
    print(f"{'kernel':<16} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>9}")
    for name in names:
        fast = next(r[name] for r in rows if r["path"] == "numba")
        slow = next(r[name] for r in rows if r["path"] == "numpy")
        print(f"{name:<16} {fast * 1e3:>12.2f} {slow * 1e3:>12.2f} {slow / fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
