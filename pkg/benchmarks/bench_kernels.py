"""Compiled vs pure-Python Lindblad right-hand side, and a full evolution.

    python benchmarks/bench_kernels.py [--dims 64 136 256] [--repeat 50]

Both backends are checked against each other before timing.
"""

import argparse
import time

import numpy as np

from dampedcasimir import dynamics, fock, kernels
from dampedcasimir.params import SystemParams, derive


def time_rhs(f, rho, repeat):
    f(rho)
    start = time.perf_counter()
    for _ in range(repeat):
        f(rho)
    return (time.perf_counter() - start) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[64, 136, 256])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--t-final", type=float, default=1.0, help="gamma*t of the evolution benchmark")
    args = ap.parse_args()

    backends = list(kernels.BACKENDS)
    if "compiled" not in backends:
        print("compiled extension not available; only the python backend is timed")
    p = derive(SystemParams.from_ratios(0.85, 10.0, 3.0))
    rng = np.random.default_rng(1)

    print(f"{'dim':>5} {'mode':>9} " + " ".join(f"{b + ' [ms]':>15}" for b in backends) + "  speedup")
    for dim in args.dims:
        space = fock.HilbertSpace(dim)
        L = dynamics.liouvillian_microscopic(p, space)
        x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = x @ x.conj().T
        rho /= np.trace(rho)
        for hermitian in (False, True):
            outs = {b: L.banded.apply(rho, b, hermitian) for b in backends}
            if len(outs) == 2:
                gap = np.max(np.abs(outs["compiled"] - outs["python"])) / np.max(np.abs(outs["python"]))
                assert gap < 1e-12, f"backends disagree by {gap:.2e}"
            times = {b: time_rhs(L.banded.rhs_function(b, hermitian), rho, args.repeat) for b in backends}
            speedup = times["python"] / times["compiled"] if "compiled" in times else 1.0
            mode = "hermitian" if hermitian else "general"
            print(f"{dim:5d} {mode:>9} " + " ".join(f"{1e3 * times[b]:15.3f}" for b in backends)
                  + f"  {speedup:6.2f}x")

    print(f"\nvacuum evolution to gamma*t = {args.t_final}, 11 output points")
    times = np.linspace(0.0, args.t_final, 11)
    for b in backends:
        opts = dynamics.IntegratorOptions(backend=b)
        start = time.perf_counter()
        run = dynamics.simulate_photon_number(p, times, "microscopic", opts=opts)
        wall = time.perf_counter() - start
        err = np.max(np.abs(run.photon_number - dynamics.analytic.n_microscopic(times, p)))
        print(f"  {b:9s} dim {run.dim}: {wall:7.2f} s, {run.trajectory.stats['nfev']} RHS calls, "
              f"max |n - closed form| = {err:.1e}")


if __name__ == "__main__":
    main()
