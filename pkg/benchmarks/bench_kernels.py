"""Time the compiled and pure-Python kernels on Monte Carlo sized panels.

Run ``python3 benchmarks/bench_kernels.py [--n 20] [--T 20] [--repeat 200]``.
"""

import argparse
import timeit

import numpy as np

from pbpanel import kernels
from pbpanel.dgp import DgpConfig, generate_panel
from pbpanel.inference import rademacher, sieve_fit
from pbpanel.pb import pb_estimate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--T", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)

    panel = generate_panel(DgpConfig(n=args.n, T=args.T), 0)
    sf = sieve_fit(panel, pb_estimate(panel, per_unit=False).beta_hat)
    signs = rademacher(0, 0, sf.n_periods)
    jobs = {
        "bewley_project": lambda b: kernels.bewley_project(panel.y, panel.X, panel.offsets, 1,
                                                           backend=b),
        "regenerate": lambda b: kernels.regenerate(sf.y0, sf.x0, panel.offsets, sf.c, sf.alpha,
                                                   sf.beta, sf.uy, sf.ux, signs, sf.sidx,
                                                   backend=b),
    }
    backends = kernels.available_backends()
    print(f"n={args.n} T={args.T} repeat={args.repeat} backends={backends}")
    for name, job in jobs.items():
        times = {}
        for b in backends:
            times[b] = min(timeit.repeat(lambda: job(b), number=args.repeat, repeat=3))
            times[b] /= args.repeat
        line = "  ".join(f"{b} {1e6 * t:9.1f} us" for b, t in times.items())
        if len(times) == 2:
            line += f"  speedup x{times['python'] / times['cython']:.1f}"
        print(f"{name:15s} {line}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
