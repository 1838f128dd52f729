"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Compilation happens in a warm-up call and is reported separately.
"""

import argparse
import time
import timeit

import numpy as np

from aflbt import _kernels as K
from aflbt.btcore import strength_design
from aflbt.features import design_frame
from aflbt.synth import SynthSpec, generate_games, random_pair_counts


def cases():
    rng = np.random.default_rng(0)
    ds = generate_games(SynthSpec(seasons=(2015, 2016), seed=0))
    frame = design_frame(ds, "last4")
    X, y = np.ascontiguousarray(frame.X), frame.y
    w = np.ones_like(y)
    beta = rng.normal(scale=0.01, size=X.shape[1])
    series = rng.normal(size=25)
    grid_design, _ = strength_design(random_pair_counts("ABC", 0), "A")
    grid = np.round(np.linspace(-3, 3, 601), 10)
    g = (grid_design.X, grid_design.y, grid_design.w, grid)
    return {
        "exclusive_cumsum (25)": ((series,), K.nb_exclusive_cumsum, K.np_exclusive_cumsum),
        "rolling_sum (25, w=4)": ((series, 4), K.nb_rolling_sum, K.np_rolling_sum),
        f"loglik_score_info ({X.shape[0]}x{X.shape[1]})": ((X, y, w, beta), K.nb_loglik_score_info,
                                                          K.np_loglik_score_info),
        f"univariate_newton ({X.shape[0]}x{X.shape[1]})": ((X, y, w, 50, 1e-10, 30), K.nb_univariate_newton,
                                                          K.np_univariate_newton),
        "grid_loglik (601x601)": (g, K.nb_grid_loglik, K.np_grid_loglik),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if K.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<34}{'compile s':>10}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}")
    for name, (call_args, nb, np_) in cases().items():
        t0 = time.perf_counter()
        nb(*call_args)
        compile_s = time.perf_counter() - t0
        number = 3 if "grid" in name or "newton" in name else 200
        t_nb = min(timeit.repeat(lambda: nb(*call_args), number=number, repeat=args.repeat)) / number
        t_np = min(timeit.repeat(lambda: np_(*call_args), number=number, repeat=args.repeat)) / number
        print(f"{name:<34}{compile_s:>10.2f}{1e3 * t_nb:>11.3f}{1e3 * t_np:>11.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
