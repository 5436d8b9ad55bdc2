#!/usr/bin/env python3
"""Benchmark the compiled block kernels against the NumPy fallback.

Times the three hot operations at representative sizes, then an end-to-end
kernel recurrence solve (where the right-hand side lives inside DOP853).

    python benchmarks/bench_blockops.py [--repeat 20000]
"""

import argparse
import time

import numpy as np

from heisenbath import _pykernels

try:
    from heisenbath import _fastkernels
except ImportError:
    _fastkernels = None

def timeit(fn, repeat):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_ops(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for db, ds in ((2, 2), (3, 2), (8, 2)):
        f = rng.normal(size=(db, db, ds, ds)) + 1j * rng.normal(size=(db, db, ds, ds))
        g = rng.normal(size=(db, db, ds, ds)) + 1j * rng.normal(size=(db, db, ds, ds))
        omega = rng.normal(size=(db, db, ds, ds))
        stack = np.stack([g, f, g, f])
        cases = {
            "fam_mul": lambda impl: impl.fam_mul(f, g),
            "fam_commutator": lambda impl: impl.fam_commutator(f, g, 1j),
            "kernel_stack_rhs": lambda impl: impl.kernel_stack_rhs(f, omega, 0.7, stack),
        }
        for name, call in cases.items():
            t_py = timeit(lambda: call(_pykernels), repeat)
            if _fastkernels is not None:
                t_cy = timeit(lambda: call(_fastkernels), repeat)
                rows.append((f"{name} (dB={db}, dS={ds})", t_py, t_cy))
            else:
                rows.append((f"{name} (dB={db}, dS={ds})", t_py, None))
    return rows


_END_TO_END = """
import time
from heisenbath.dyson import compute_kernels
from heisenbath.presets import dephasing_bath, two_qubit
from heisenbath.spaces import TimeGrid
for label, preset, stop in (
    ("two_qubit kernels (order 4)", two_qubit(0.25), 4.0),
    ("dephasing_bath kernels (order 4)", dephasing_bath(), 6.0),
):
    grid = TimeGrid.linspace(stop, 17)
    compute_kernels(preset.model, 4, grid)  # warm up
    start = time.perf_counter()
    compute_kernels(preset.model, 4, grid)
    print(f"{label}\\t{time.perf_counter() - start}")
"""


def bench_end_to_end():
    """Full order-4 kernel solve: adaptive DOP853 driving the stack RHS.

    Runs in subprocesses so the backend really is chosen by the import-time
    selection mechanism (HEISENBATH_NO_EXT).
    """
    import os
    import subprocess
    import sys

    rows = []
    variants = [("python", {"HEISENBATH_NO_EXT": "1"})]
    if _fastkernels is not None:
        variants.append(("cython", {}))
    for impl_name, extra_env in variants:
        env = dict(os.environ, **extra_env)
        out = subprocess.run(
            [sys.executable, "-c", _END_TO_END], capture_output=True, text=True, env=env
        )
        for line in out.stdout.strip().splitlines():
            label, seconds = line.rsplit("\t", 1)
            rows.append((label, impl_name, float(seconds)))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20000)
    args = parser.parse_args()

    if _fastkernels is None:
        print("note: compiled kernels not built; timing the fallback only\n")

    print(f"{'operation':38s} {'python':>12s} {'cython':>12s} {'speedup':>9s}")
    for name, t_py, t_cy in bench_ops(args.repeat):
        if t_cy is None:
            print(f"{name:38s} {t_py * 1e6:10.2f}us {'-':>12s} {'-':>9s}")
        else:
            print(f"{name:38s} {t_py * 1e6:10.2f}us {t_cy * 1e6:10.2f}us {t_py / t_cy:8.1f}x")

    print()
    end = bench_end_to_end()
    by_label = {}
    for label, impl_name, seconds in end:
        by_label.setdefault(label, {})[impl_name] = seconds
    for label, res in by_label.items():
        line = f"{label:38s}"
        for impl_name in ("python", "cython"):
            if impl_name in res:
                line += f" {impl_name}={res[impl_name] * 1e3:8.1f}ms"
        if "python" in res and "cython" in res:
            line += f"  ({res['python'] / res['cython']:.1f}x)"
        print(line)


if __name__ == "__main__":
    main()
