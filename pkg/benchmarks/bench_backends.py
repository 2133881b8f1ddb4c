#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot paths (height measurement, saturation measurement, and
environment-only mass expansion) on both backends and prints a comparison
table.  Run from the repository root:

    python3 benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import boxcascade as bc
from boxcascade import backend


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(quick: bool):
    law = bc.uniform_stick()
    n_values = [2 ** 16, 2 ** 18] if quick else [2 ** 16, 2 ** 19, 2 ** 22]
    k_mass = 16 if quick else 21
    rows = []
    for name in ("numba", "numpy"):
        with backend.use(name):
            # warm compilation / imports outside the timed region
            occ0 = bc.throw_balls(bc.build_environment(law, 1), 4096, ball_seed=1)
            bc.height(occ0, 2)
            for n in n_values:
                def run(n=n):
                    env = bc.build_environment(law, 11)
                    occ = bc.throw_balls(env, n, ball_seed=13)
                    return bc.height(occ, 2)
                t, h = _time(run)
                rows.append((name, f"height j=2, n=2^{n.bit_length() - 1}", t, f"H={h}"))

            def run_sat():
                env = bc.build_environment(law, 11)
                occ = bc.throw_balls(env, n_values[-1], ball_seed=13)
                return bc.saturation(occ, 2)
            t, g = _time(run_sat)
            rows.append((name, f"saturation j=2, n=2^{n_values[-1].bit_length() - 1}", t, f"G={g}"))

            def run_mass():
                env = bc.build_environment(law, 11)
                return bc.mass_extremes_by_generation(env, k_mass)[1][-1]
            t, pm = _time(run_mass)
            rows.append((name, f"mass expansion to k={k_mass}", t, f"p_max={pm:.3g}"))
    width = max(len(r[1]) for r in rows)
    print(f"{'backend':<8} {'task':<{width}} {'best (s)':>10}  result")
    for name, task, t, res in rows:
        print(f"{name:<8} {task:<{width}} {t:>10.4f}  {res}")
    print()
    by_task = {}
    for name, task, t, _ in rows:
        by_task.setdefault(task, {})[name] = t
    for task, d in by_task.items():
        if len(d) == 2:
            print(f"speedup numba/numpy on {task}: {d['numpy'] / d['numba']:.2f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller sizes")
    bench(ap.parse_args().quick)
