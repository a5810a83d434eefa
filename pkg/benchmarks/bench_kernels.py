#!/usr/bin/env python3
"""Timing comparison of the compiled and pure normal-law kernels.

Each kernel runs over a large float64 array through both backend modules;
the table reports per-element cost and the compiled speedup, plus the
worst relative disagreement as a sanity check. The final block times a
full mixture draw through the public API under whichever backend the
package selected at import (rerun with CCOPF_PURE_PYTHON=1 to compare
end to end).

Usage: python3 benchmarks/bench_kernels.py [--size N] [--repeats R]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from ccopf import (
    build_matrices,
    build_mixture,
    build_polytope,
    build_uncertainty,
    bundled_case_path,
    compute_margins,
    draw_mixture_scenarios,
    load_case,
)
from ccopf.kernels import BACKEND, norm_sf, pure

try:
    from ccopf.kernels import _fast
except ImportError:  # built without a compiler
    _fast = None


def _best_seconds(func, arr: np.ndarray, repeats: int) -> float:
    timer = timeit.Timer(lambda: func(arr))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeats, number=number)) / number


def _rel_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(np.abs(a), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


def main() -> None:
    parser = argparse.ArgumentParser(description="kernel backend benchmark")
    parser.add_argument("--size", type=int, default=10**6, help="array length")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    z = rng.standard_normal(args.size)
    p = rng.uniform(1e-9, 1.0 - 1e-9, args.size)
    u = 1.0 - rng.random(args.size)  # (0, 1], what the sampler feeds in
    p_tail = float(norm_sf(2.0))

    cases = [
        ("erfc", lambda mod: mod.erfc, z),
        ("norm_cdf", lambda mod: mod.norm_cdf, z),
        ("norm_sf", lambda mod: mod.norm_sf, z),
        ("norm_ppf", lambda mod: mod.norm_ppf, p),
        ("tail_quantile(beta=2)", lambda mod: (lambda x: mod.tail_quantile(2.0, p_tail, x)), u),
    ]

    print(f"array length {args.size}, best of {args.repeats} repeats")
    if _fast is None:
        print("compiled backend not built; timing the pure backend only\n")
        print(f"{'kernel':<24}{'pure ns/elt':>14}")
        for name, pick, arr in cases:
            t_pure = _best_seconds(pick(pure), arr, args.repeats)
            print(f"{name:<24}{t_pure / args.size * 1e9:>14.1f}")
    else:
        print()
        header = f"{'kernel':<24}{'pure ns/elt':>14}{'compiled ns/elt':>18}{'speedup':>10}{'max rel gap':>14}"
        print(header)
        print("-" * len(header))
        for name, pick, arr in cases:
            f_pure, f_fast = pick(pure), pick(_fast)
            t_pure = _best_seconds(f_pure, arr, args.repeats)
            t_fast = _best_seconds(f_fast, arr, args.repeats)
            gap = _rel_gap(f_pure(arr), np.asarray(f_fast(arr)))
            print(
                f"{name:<24}{t_pure / args.size * 1e9:>14.1f}"
                f"{t_fast / args.size * 1e9:>18.1f}"
                f"{t_pure / t_fast:>10.2f}{gap:>14.2e}"
            )

    case = load_case(bundled_case_path("case30"))
    g = build_uncertainty(case, 0.07)
    poly = build_polytope(case, build_matrices(case))
    ms = build_mixture(poly, compute_margins(poly, g, 0.05), g)
    n_draw = 10**5
    timer = timeit.Timer(lambda: draw_mixture_scenarios(ms, n_draw, seed=1))
    number, _ = timer.autorange()
    t_draw = min(timer.repeat(repeat=args.repeats, number=number)) / number
    print(
        f"\nmixture draw, 30-bus case, {n_draw} scenarios "
        f"[{BACKEND} backend]: {t_draw * 1e3:.1f} ms "
        f"({t_draw / n_draw * 1e9:.0f} ns/scenario)"
    )


if __name__ == "__main__":
    main()
