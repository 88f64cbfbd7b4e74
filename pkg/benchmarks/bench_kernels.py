"""Timing of the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--n 200000] [--repeat 20]

The kernel comparison runs in-process (both implementations are importable
side by side).  The end-to-end comparison runs the counterexample norms in a
subprocess with CZLAB_NUMBA=1 and CZLAB_NUMBA=0, since the flag is read at
import time.
"""
import argparse
import os
import subprocess
import sys
import textwrap
import timeit

import numpy as np

from czlab import _kernels
from czlab.quadrature import WG, WK

E2E = textwrap.dedent("""
    import time
    from czlab import _kernels
    from czlab.experiments import run_counterexample, run_scaling
    from czlab.warpfn import SawtoothSpec
    run_counterexample(SawtoothSpec.default())  # warm-up and JIT compile
    t0 = time.perf_counter()
    for _ in range({reps}):
        run_counterexample(SawtoothSpec.default())
        run_scaling()
    print(_kernels.USE_NUMBA, (time.perf_counter() - t0) / {reps})
""")


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(n, repeat, rng):
    if not _kernels.USE_NUMBA:
        print("numba path disabled (CZLAB_NUMBA=0 or numba missing); kernel timing skipped")
        return
    coeffs = rng.standard_normal((64, 6))
    idx = rng.integers(0, 64, n)
    tau = rng.uniform(0, 1, n)
    fvals = rng.standard_normal((n // 15, 15))
    half = rng.uniform(0.1, 1, n // 15)
    _kernels.horner3(coeffs, idx, tau)
    _kernels.gk_reduce(fvals, half, WK, WG)
    rows = [
        ("horner3", lambda: _kernels.horner3(coeffs, idx, tau),
         lambda: _kernels.horner3_numpy(coeffs, idx, tau)),
        ("gk_reduce", lambda: _kernels.gk_reduce(fvals, half, WK, WG),
         lambda: _kernels.gk_reduce_numpy(fvals, half, WK, WG)),
    ]
    print(f"{'kernel':<12}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fast, slow in rows:
        a, b = _best(fast, repeat), _best(slow, repeat)
        print(f"{name:<12}{a * 1e3:>12.3f}{b * 1e3:>12.3f}{b / a:>10.2f}")


def bench_end_to_end(reps):
    print(f"\nend-to-end counterexample + scaling, mean of {reps} runs")
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, CZLAB_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", E2E.format(reps=reps)], env=env,
                              capture_output=True, text=True, check=True)
        used, sec = proc.stdout.split()
        out[flag] = float(sec)
        print(f"CZLAB_NUMBA={flag} (numba active: {used}): {float(sec) * 1e3:.1f} ms")
    print(f"speedup {out['0'] / out['1']:.2f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--e2e-reps", type=int, default=3)
    args = ap.parse_args()
    bench_kernels(args.n, args.repeat, np.random.default_rng(0))
    bench_end_to_end(args.e2e_reps)


if __name__ == "__main__":
    main()
