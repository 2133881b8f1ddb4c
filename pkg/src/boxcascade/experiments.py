"""Batch harness: slope regressions against ln n, threshold scans, spacings.

Heights and saturation levels grow logarithmically; each run measures a
grid of ball counts with replicated independent realizations, regresses the
replica means on ln n with unweighted least squares, and reports the slope
next to the predicted constant from the constants module (never hard-coded).
Replica seeds are pure derivations of (base_seed, n index, replica index),
so results do not depend on execution order and replicas can fan out across
processes.

Finite-size corrections of the measured quantities are of order ln ln n
with unknown constants, so slope tolerances at desk scale are engineering
choices (20-25 percent for the headline constants); they are recorded in
the emitted header.
"""

from __future__ import annotations

import concurrent.futures as cf
import functools
import io
import math
import multiprocessing
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import cascade, constants as const_mod
from . import entropy as ent
from .laws import parse_law_spec

SALT_ENV_SEED = 0x9E1702C3D5A7F64B
SALT_BALL_SEED = 0x6A09E667F3BCC909
SALT_SPACING = 0x3C6EF372FE94F82B


def replica_seeds(base_seed: int, n_index: int, replica: int) -> tuple:
    """(env_seed, ball_seed) for one grid point and replica."""
    return (ent.derive_seed(base_seed, n_index, replica, salt=SALT_ENV_SEED),
            ent.derive_seed(base_seed, n_index, replica, salt=SALT_BALL_SEED))


@dataclass(frozen=True)
class ExperimentConfig:
    """One slope run: law, target quantity, threshold, grid and seeds."""

    law: str
    target: str                    # "height" | "saturation"
    threshold: tuple               # ("fixed", j) | ("power", alpha)
    n_grid: tuple
    replicas: int
    base_seed: int
    mode: str = "exact"            # "exact" | "poisson"
    budget: int = cascade.DEFAULT_BUDGET
    workers: int = 1

    def __post_init__(self):
        parse_law_spec(self.law)
        if self.target not in ("height", "saturation"):
            raise ValueError("target must be 'height' or 'saturation'")
        kind, value = self.threshold
        if kind == "fixed":
            j = int(value)
            if self.target == "height" and j < 2:
                raise ValueError("height thresholds start at j = 2")
            if j < 1:
                raise ValueError("thresholds must be positive")
        elif kind == "power":
            if not 0.0 < float(value) < 1.0:
                raise ValueError("alpha must lie in (0, 1)")
        else:
            raise ValueError(f"unknown threshold kind {kind!r}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing with >= 4 points")
        object.__setattr__(self, "n_grid", grid)
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.mode not in ("exact", "poisson"):
            raise ValueError("mode must be 'exact' or 'poisson'")


@dataclass(frozen=True)
class SlopeEstimate:
    """Least-squares slope of a measured quantity against ln n."""

    label: str
    law: str
    target: str
    threshold: tuple
    mode: str
    n_grid: tuple
    replicas: int
    base_seed: int
    means: tuple
    sds: tuple
    slope: float
    intercept: float
    stderr: float
    reference_constant: float
    relative_gap: float


def fit_loglinear(ns: Sequence[int], ys: Sequence[float]) -> tuple:
    """Unweighted least squares of y on ln n: (slope, intercept, stderr)."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.asarray(ys, dtype=np.float64)
    if x.size < 3:
        raise ValueError("need at least 3 grid points for a slope error")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    sigma2 = float(resid @ resid) / (x.size - 2)
    return slope, intercept, math.sqrt(sigma2 / sxx)


@functools.lru_cache(maxsize=32)
def _law_cache(spec: str):
    return parse_law_spec(spec)


def threshold_for(config_threshold: tuple, n: int) -> int:
    kind, value = config_threshold
    if kind == "fixed":
        return int(value)
    return int(math.ceil(n ** float(value)))


def _measure_task(args):
    (law_spec, n, mode, env_seed, ball_seed, target, thresholds, budget) = args
    law = _law_cache(law_spec)
    env = cascade.build_environment(law, env_seed)
    occ = cascade.throw_balls(env, n, mode=mode, ball_seed=ball_seed)
    if target == "height":
        got = cascade.heights_multi(occ, thresholds, budget=budget)
        return tuple(got[j] for j in thresholds)
    return tuple(cascade.saturation(occ, j, budget=budget) for j in thresholds)


def _run_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_measure_task(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    results = [None] * len(tasks)
    with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        for i, res in zip(range(len(tasks)), pool.map(_measure_task, tasks, chunksize=1)):
            results[i] = res
    return results


def reference_for(config: ExperimentConfig) -> float:
    """Predicted slope from the constants module for this configuration."""
    law = _law_cache(config.law)
    profile = law.profile()
    cc = const_mod.compute_constants(profile)
    if config.target == "height":
        return const_mod.height_constant(cc, profile, config.threshold)
    return const_mod.saturation_constant(cc, config.threshold)


def _measurements(config: ExperimentConfig, thresholds_by_n):
    tasks = []
    for ni, n in enumerate(config.n_grid):
        for rep in range(config.replicas):
            env_seed, ball_seed = replica_seeds(config.base_seed, ni, rep)
            tasks.append((config.law, n, config.mode, env_seed, ball_seed,
                          config.target, thresholds_by_n[ni], config.budget))
    raw = _run_tasks(tasks, config.workers)
    r = config.replicas
    per_point = [raw[i * r:(i + 1) * r] for i in range(len(config.n_grid))]
    return per_point


def slope_run(config: ExperimentConfig) -> SlopeEstimate:
    """Measure the configured quantity over the grid and regress on ln n."""
    reference = reference_for(config)
    thresholds_by_n = [(threshold_for(config.threshold, n),) for n in config.n_grid]
    per_point = _measurements(config, thresholds_by_n)
    vals = np.array([[rep[0] for rep in reps] for reps in per_point], dtype=np.float64)
    means = vals.mean(axis=1)
    sds = vals.std(axis=1, ddof=1) if config.replicas > 1 else np.zeros(len(config.n_grid))
    slope, intercept, stderr = fit_loglinear(config.n_grid, means)
    kind, value = config.threshold
    label = f"{config.target}[{kind}={value:g}]"
    return SlopeEstimate(
        label=label, law=config.law, target=config.target,
        threshold=config.threshold, mode=config.mode, n_grid=config.n_grid,
        replicas=config.replicas, base_seed=config.base_seed,
        means=tuple(float(v) for v in means), sds=tuple(float(v) for v in sds),
        slope=slope, intercept=intercept, stderr=stderr,
        reference_constant=reference,
        relative_gap=(slope - reference) / reference)


def phase_scan(law: str, j_list: Sequence[int], n_grid: Sequence[int],
               replicas: int, base_seed: int, mode: str = "exact",
               budget: int = cascade.DEFAULT_BUDGET, workers: int = 1) -> list:
    """Height slopes for several fixed thresholds, one coupled pass per replica.

    All thresholds share each (environment, balls) realization, which
    preserves the pathwise ordering of heights in j and sharpens the
    flattening comparison across the transition.
    """
    j_list = tuple(sorted(set(int(j) for j in j_list)))
    if not j_list or j_list[0] < 2:
        raise ValueError("phase scans need thresholds j >= 2")
    cfg = ExperimentConfig(law=law, target="height", threshold=("fixed", j_list[0]),
                           n_grid=tuple(n_grid), replicas=replicas,
                           base_seed=base_seed, mode=mode, budget=budget,
                           workers=workers)
    thresholds_by_n = [j_list for _ in cfg.n_grid]
    per_point = _measurements(cfg, thresholds_by_n)
    law_obj = _law_cache(law)
    profile = law_obj.profile()
    cc = const_mod.compute_constants(profile)
    out = []
    for idx, j in enumerate(j_list):
        vals = np.array([[rep[idx] for rep in reps] for reps in per_point], dtype=np.float64)
        means = vals.mean(axis=1)
        sds = vals.std(axis=1, ddof=1) if replicas > 1 else np.zeros(len(cfg.n_grid))
        slope, intercept, stderr = fit_loglinear(cfg.n_grid, means)
        reference = const_mod.height_constant(cc, profile, ("fixed", j))
        out.append(SlopeEstimate(
            label=f"height[fixed={j}]", law=law, target="height",
            threshold=("fixed", j), mode=mode, n_grid=cfg.n_grid,
            replicas=replicas, base_seed=base_seed,
            means=tuple(float(v) for v in means), sds=tuple(float(v) for v in sds),
            slope=slope, intercept=intercept, stderr=stderr,
            reference_constant=reference,
            relative_gap=(slope - reference) / reference))
    return out


# ---------------------------------------------------------------------------
# order-statistics spacing experiment

@dataclass(frozen=True)
class SpacingResult:
    """Extreme cluster widths of n uniform points, per grid point."""

    n_list: tuple
    j: int
    alpha_list: tuple
    replicas: int
    seed: int
    mean_ln_min_cluster: tuple      # ln of minimal width over j consecutive points
    mean_ln_max_window: tuple       # ln of maximal span of j+1 consecutive spacings
    mean_scaled_max_window: tuple   # mean of n * max window
    mean_ln_min_cluster_pow: dict   # alpha -> tuple over n
    slope_min_cluster: float
    reference_min_cluster: float
    slopes_pow: dict                # alpha -> slope
    references_pow: dict            # alpha -> -(1 - alpha)


def uniform_order_statistics(n: int, rng: np.random.Generator) -> np.ndarray:
    """Order statistics of n uniforms via normalized exponential partial sums
    (no sort)."""
    gams = np.cumsum(rng.exponential(size=n + 1))
    return gams[:n] / gams[n]


def min_cluster_width(u: np.ndarray, j: int) -> float:
    """Minimal width of j consecutive ordered points (j - 1 spacings)."""
    n = u.size
    if j < 2 or j > n:
        raise ValueError("cluster size must satisfy 2 <= j <= n")
    return float((u[j - 1:] - u[: n - j + 1]).min())


def max_window_span(u: np.ndarray, j: int) -> float:
    """Maximal distance between ordered points i and i+j, padded with 0 and 1.

    For j = 1 this is the largest spacing (boundary gaps included).
    """
    p = np.concatenate(([0.0], u, [1.0]))
    return float((p[j:] - p[: p.size - j]).max())


def spacing_experiment(n_list: Sequence[int], j: int,
                       alpha_list: Sequence[float], replicas: int,
                       seed: int) -> SpacingResult:
    """Scaling exponents of extreme spacings of uniform order statistics.

    The minimal j-cluster width scales like n^(-j/(j-1)); clusters of
    ceil(n^alpha) points behave like the equidistributed case n^(-1+alpha);
    the maximal gap carries an extra ln n factor over 1/n.
    """
    n_list = tuple(int(n) for n in n_list)
    j = int(j)
    if j < 2:
        raise ValueError("cluster size starts at j = 2")
    alpha_list = tuple(float(a) for a in alpha_list)
    ln_min = []
    ln_max = []
    scaled_max = []
    ln_pow = {a: [] for a in alpha_list}
    for ni, n in enumerate(n_list):
        acc_min, acc_max, acc_sc = [], [], []
        acc_pow = {a: [] for a in alpha_list}
        for rep in range(replicas):
            rng = np.random.Generator(np.random.PCG64(
                ent.derive_seed(seed, ni, rep, salt=SALT_SPACING)))
            u = uniform_order_statistics(n, rng)
            w = min_cluster_width(u, j)
            g = max_window_span(u, j)
            acc_min.append(math.log(w))
            acc_max.append(math.log(g))
            acc_sc.append(n * max_window_span(u, 1))
            for a in alpha_list:
                jn = max(2, int(math.ceil(n ** a)))
                acc_pow[a].append(math.log(min_cluster_width(u, jn)))
        ln_min.append(float(np.mean(acc_min)))
        ln_max.append(float(np.mean(acc_max)))
        scaled_max.append(float(np.mean(acc_sc)))
        for a in alpha_list:
            ln_pow[a].append(float(np.mean(acc_pow[a])))
    slope_min = fit_loglinear(n_list, ln_min)[0]
    slopes_pow = {a: fit_loglinear(n_list, ln_pow[a])[0] for a in alpha_list}
    return SpacingResult(
        n_list=n_list, j=j, alpha_list=alpha_list, replicas=replicas, seed=seed,
        mean_ln_min_cluster=tuple(ln_min), mean_ln_max_window=tuple(ln_max),
        mean_scaled_max_window=tuple(scaled_max),
        mean_ln_min_cluster_pow={a: tuple(v) for a, v in ln_pow.items()},
        slope_min_cluster=slope_min,
        reference_min_cluster=-j / (j - 1.0),
        slopes_pow=slopes_pow,
        references_pow={a: -(1.0 - a) for a in alpha_list})


# ---------------------------------------------------------------------------
# emission

@dataclass
class Table:
    """Column table with a reproducibility header; CSV or aligned text."""

    meta: dict
    columns: list
    rows: list

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width does not match columns")


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def slopes_table(estimates: Sequence[SlopeEstimate]) -> Table:
    if not estimates:
        raise ValueError("no slope estimates to tabulate")
    first = estimates[0]
    meta = {
        "law": first.law,
        "mode": first.mode,
        "replicas": str(first.replicas),
        "base_seed": str(first.base_seed),
        "n_grid": ",".join(str(n) for n in first.n_grid),
        "note": "slope tolerances at desk scale are engineering choices; "
                "corrections are O(ln ln n)",
    }
    cols = ["label", "slope", "stderr", "intercept", "reference", "relative_gap"]
    rows = [(e.label, e.slope, e.stderr, e.intercept, e.reference_constant,
             e.relative_gap) for e in estimates]
    return Table(meta=meta, columns=cols, rows=rows)


def slope_points_table(estimate: SlopeEstimate) -> Table:
    meta = {
        "law": estimate.law, "mode": estimate.mode, "label": estimate.label,
        "replicas": str(estimate.replicas), "base_seed": str(estimate.base_seed),
    }
    cols = ["n", "mean", "sd"]
    rows = [(n, m, s) for n, m, s in zip(estimate.n_grid, estimate.means, estimate.sds)]
    return Table(meta=meta, columns=cols, rows=rows)


def spacing_table(res: SpacingResult) -> Table:
    meta = {
        "j": str(res.j), "alphas": ",".join(f"{a:g}" for a in res.alpha_list),
        "replicas": str(res.replicas), "seed": str(res.seed),
        "slope_min_cluster": repr(res.slope_min_cluster),
        "reference_min_cluster": repr(res.reference_min_cluster),
    }
    for a in res.alpha_list:
        meta[f"slope_pow_{a:g}"] = repr(res.slopes_pow[a])
        meta[f"reference_pow_{a:g}"] = repr(res.references_pow[a])
    cols = ["n", "mean_ln_min_cluster", "mean_ln_max_window", "mean_n_max_gap"]
    cols += [f"mean_ln_min_cluster_a{a:g}" for a in res.alpha_list]
    rows = []
    for i, n in enumerate(res.n_list):
        row = [n, res.mean_ln_min_cluster[i], res.mean_ln_max_window[i],
               res.mean_scaled_max_window[i]]
        row += [res.mean_ln_min_cluster_pow[a][i] for a in res.alpha_list]
        rows.append(tuple(row))
    return Table(meta=meta, columns=cols, rows=rows)


def emit(results, format: str = "csv", destination="-") -> None:
    """Write a Table (or slope estimates) as CSV or aligned text.

    The emitted header carries the full configuration and seeds; identical
    inputs produce byte-identical output.
    """
    if isinstance(results, Table):
        table = results
    elif isinstance(results, SpacingResult):
        table = spacing_table(results)
    else:
        table = slopes_table(list(results))
    if not table.rows:
        raise ValueError("refusing to emit an empty result set")
    if format == "csv":
        text = to_csv_text(table)
    elif format == "table":
        text = to_table_text(table)
    else:
        raise ValueError("format must be 'csv' or 'table'")
    if destination in ("-", None):
        import sys
        sys.stdout.write(text)
        return
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {destination}: {exc}") from exc


def to_csv_text(table: Table) -> str:
    buf = io.StringIO()
    for k in sorted(table.meta):
        buf.write(f"# {k}={table.meta[k]}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt_cell(v) for v in row) + "\n")
    return buf.getvalue()


def to_table_text(table: Table) -> str:
    cells = [table.columns] + [[_fmt_cell(v) for v in row] for row in table.rows]
    widths = [max(len(r[c]) for r in cells) for c in range(len(table.columns))]
    buf = io.StringIO()
    for k in sorted(table.meta):
        buf.write(f"# {k}={table.meta[k]}\n")
    for r in cells:
        buf.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")
    return buf.getvalue()


def _parse_cell(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(source) -> Table:
    """Parse a CSV produced by emit back into a Table (round-trip exact)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    meta = {}
    columns = None
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
            continue
        parts = line.split(",")
        if columns is None:
            columns = parts
            continue
        rows.append(tuple(_parse_cell(p) for p in parts))
    if columns is None:
        raise ValueError("no header row found")
    return Table(meta=meta, columns=columns, rows=rows)


def default_workers() -> int:
    env = os.environ.get("BOXCASCADE_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)
