"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--sites 2 4 8]

Each kernel is called on identical inputs through both tables, the results
are compared, and the median wall time per call is reported.  The last
section runs a short flow integration in a subprocess per backend, with the
backend chosen by SOVCHAIN_NUMBA as in normal use.
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from sovchain import _kernels
from sovchain.model import ChainSpec, TwistMatrix, _site_blocks, _site_derivatives, chain_lax
from sovchain.poisson import build_bivector
from sovchain.sampling import XorShift64Star, random_phase_point

FLOW_SNIPPET = """
import time
from sovchain import _kernels
from sovchain.flows import integrate_flow
from sovchain.model import ChainSpec, TwistMatrix
from sovchain.sampling import XorShift64Star, random_phase_point
spec = ChainSpec("rational", {n}, tuple(range(1, {n} + 1)), TwistMatrix([[1, 0.4], [0.5, 0.2]]))
xi = random_phase_point(spec, XorShift64Star(3))
integrate_flow(spec, xi, 1, 0.05, samples=3)  # warm-up / compile
t0 = time.perf_counter()
traj = integrate_flow(spec, xi, 1, 0.5, samples=11)
print(_kernels.BACKEND, time.perf_counter() - t0, traj.stats.rhs_evals)
"""


def median_time(fn, repeat):
    fn()  # warm-up (triggers numba compilation)
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def kernel_inputs(n_sites, seed=1):
    spec = ChainSpec("rational", n_sites, tuple(range(1, n_sites + 1)),
                     TwistMatrix([[1.0, 0.4], [0.5, 0.2]]))
    xi = random_phase_point(spec, XorShift64Star(seed))
    bv = build_bivector(spec)
    sites = np.ascontiguousarray(_site_blocks(spec, xi))
    dsites = np.ascontiguousarray(_site_derivatives(spec.model, spec.nu))
    twist = np.ascontiguousarray(spec.twist.c, dtype=np.complex128)
    num = chain_lax(spec, xi).num
    flat = np.ascontiguousarray(num.reshape(-1, num.shape[-1]))
    return {
        "polyval": (flat, 0.3 + 0.2j),
        "chain_product": (sites, twist),
        "chain_product_jac": (sites, dsites, twist),
        "bivector": (np.ascontiguousarray(xi), *bv.terms, bv.dim),
        "bivector_derivative": (np.ascontiguousarray(xi), *bv.terms, bv.dim),
    }


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def bench_kernels(sites, repeat):
    fast, slow = _kernels.kernels("numba"), _kernels.kernels("numpy")
    print(f"{'kernel':22s} {'N':>3s} {'numpy [us]':>12s} {'numba [us]':>12s} "
          f"{'speed-up':>9s} {'max |diff|':>11s}")
    for n in sites:
        args = kernel_inputs(n)
        for name, a in args.items():
            t_np = median_time(lambda: slow[name](*a), repeat)
            t_nb = median_time(lambda: fast[name](*a), repeat)
            diff = max_diff(slow[name](*a), fast[name](*a))
            print(f"{name:22s} {n:3d} {t_np * 1e6:12.1f} {t_nb * 1e6:12.1f} "
                  f"{t_np / t_nb:9.1f} {diff:11.2e}")


def bench_flow(n):
    for flag in ("0", "1"):
        env = dict(os.environ, SOVCHAIN_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", FLOW_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"flow N={n} backend={out[0]:6s} {float(out[1]):8.3f} s  rhs evals={out[2]}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sites", type=int, nargs="+", default=[2, 4, 8])
    ap.add_argument("--flow-sites", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels.NUMBA_KERNELS is None:
        sys.exit("numba is not installed; nothing to compare")
    bench_kernels(args.sites, args.repeat)
    print()
    bench_flow(args.flow_sites)


if __name__ == "__main__":
    main()
