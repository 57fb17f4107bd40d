"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Both flavours are called directly, so the result does not depend on
ZBRIDGE_BACKEND.  The first numba call (compilation or cache load) is excluded.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from zbridge import _kernels as K


def cases(rng):
    logw = rng.normal(0.0, 3.0, 100_000)
    x = rng.normal(0.0, 10.0, 10_000)
    centers = rng.normal(0.0, 10.0, 10)
    w = rng.random(10_000)
    w /= w.sum()
    grid = np.linspace(-30.0, 30.0, 20_001)
    y = np.exp(-0.5 * grid**2)
    return {
        "logmeanexp_var (1e5)": (K.logmeanexp_var_np, K.logmeanexp_var_nb, (logw,)),
        "mixture_logpdf (1e4 x 10)": (K.mixture_logpdf_np, K.mixture_logpdf_nb, (x, centers, 1.0)),
        "systematic_indices (1e4)": (K.systematic_indices_np, K.systematic_indices_nb, (w, 0.3e-4, 10_000)),
        "kitagawa_drift (1e4)": (K.kitagawa_drift_np, K.kitagawa_drift_nb, (x, 3.0)),
        "cumtrapz (2e4)": (K.cumtrapz_np, K.cumtrapz_nb, (y, grid)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if not K.HAS_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    out = {}
    print(f"{'kernel':28s} {'numpy [us]':>12s} {'numba [us]':>12s} {'speed-up':>9s}  max |diff|")
    for name, (f_np, f_nb, a) in cases(rng).items():
        r_np, r_nb = f_np(*a), f_nb(*a)
        diff = float(np.max(np.abs(np.asarray(r_np, float) - np.asarray(r_nb, float))))
        t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat)) * 1e6
        t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat)) * 1e6
        out[name] = {"numpy_us": t_np, "numba_us": t_nb, "max_abs_diff": diff}
        print(f"{name:28s} {t_np:12.1f} {t_nb:12.1f} {t_np / t_nb:8.1f}x  {diff:.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
