"""Lazy multiplicative-cascade environments and the ball-occupancy scheme.

Two layers of randomness, independently seeded:

* environment layer: the split at each node is a pure function of
  (env_seed, path), so box masses form a lazily expandable, replayable tree
  and different ball counts can be coupled on one environment;
* ball layer: the exact-count multinomial splitting at each node is a pure
  function of (ball_seed, path), top-down conditional binomials.

``exact`` mode places exactly n balls; ``poissonized`` mode draws the total
from Poisson(n) first, which makes per-box counts independent Poisson
variables with mean n * mass.

Caches on the Python objects are idempotent-fill: every cached value is a
pure function of the seeds, so concurrent refills write identical values.
For strict bit-accounting keep a state confined to one thread; bulk
measurement functions only share immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.special as sps

from . import backend as backend_mod
from . import entropy as ent
from .errors import BudgetExceededError, LatticeLawError, ProfileDomainError, UnsupportedRegimeError
from .laws import LaplaceProfile, MassVector, SplittingLaw, laplace_eval, masses_from_uniforms

DEFAULT_BUDGET = 10 ** 8

Path = Sequence[int]


def _as_u64(x: int) -> np.uint64:
    return np.uint64(x & ent.MASK64)


def path_key(path: Path) -> int:
    k = ent.root_key()
    for j in path:
        if j < 0:
            raise ValueError("child indices are 0-based nonnegative ints")
        k = ent.child_key(k, j)
    return k


@dataclass
class CascadeEnvironment:
    """Deterministic lazy tree of box masses keyed by (env_seed, path)."""

    law: SplittingLaw
    env_seed: int
    _splits: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._emix = ent.env_mix(self.env_seed)

    def split_of(self, path: Path) -> MassVector:
        """Mass partition attached to the node at ``path`` (cached)."""
        tpath = tuple(path)
        rho = self._splits.get(tpath)
        if rho is None:
            kern = backend_mod.get_backend()
            ekey = ent.node_key(path_key(tpath), self._emix)
            rho = np.asarray(kern.draw_split_key(_as_u64(ekey), self.law.law_id,
                                                 self.law.param))
            self._splits[tpath] = rho
        return MassVector(rho)

    def weight_of(self, path: Path) -> float:
        """Mass of the box at ``path``; 1 at the root, multiplicative below."""
        w = 1.0
        tpath = tuple(path)
        for d in range(len(tpath)):
            rho = self.split_of(tpath[:d]).masses
            j = tpath[d]
            w *= rho[j] if j < rho.size else 0.0
            if w == 0.0:
                return 0.0
        return w


def build_environment(law: SplittingLaw, env_seed: int) -> CascadeEnvironment:
    return CascadeEnvironment(law=law, env_seed=env_seed)


def _poisson_total(n: int, ball_seed: int) -> int:
    key = ent.derive_seed(ball_seed, n, salt=ent.SALT_POISSON)
    rng = np.random.Generator(np.random.PCG64(key))
    return int(rng.poisson(n))


@dataclass
class OccupancyState:
    """Ball counts over the boxes of one (environment, n, mode) realization."""

    env: CascadeEnvironment
    n: int
    mode: str
    ball_seed: int
    realized_total: int
    _counts: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._bmix = ent.ball_mix(self.ball_seed)
        self._counts[()] = int(self.realized_total)

    def count_of(self, path: Path) -> int:
        """Number of balls in the box at ``path`` (lazily realized, cached)."""
        tpath = tuple(path)
        got = self._counts.get(tpath)
        if got is not None:
            return got
        parent = tpath[:-1]
        j = tpath[-1]
        parent_count = self.count_of(parent)
        rho = self.env.split_of(parent).masses
        kern = backend_mod.get_backend()
        bkey = ent.node_key(path_key(parent), self._bmix)
        counts = kern.draw_child_counts(_as_u64(bkey), parent_count, rho)
        for jj in range(rho.size):
            self._counts[parent + (jj,)] = int(counts[jj])
        if j >= rho.size:
            return 0
        return int(counts[j])


def throw_balls(env: CascadeEnvironment, n: int, mode: str = "exact",
                ball_seed: int = 0) -> OccupancyState:
    """Realize an occupancy of ``n`` balls (exact) or Poisson(n) (poissonized)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if mode in ("poisson", "poissonized"):
        mode = "poisson"
        total = _poisson_total(n, ball_seed)
    elif mode == "exact":
        total = n
    else:
        raise ValueError(f"mode must be 'exact' or 'poisson', got {mode!r}")
    return OccupancyState(env=env, n=n, mode=mode, ball_seed=ball_seed,
                          realized_total=total)


def throw_balls_per_ball(env: CascadeEnvironment, n: int, ball_seed: int,
                         depth: int) -> dict:
    """Reference occupancy built ball by ball (small n only).

    Each ball walks down ``depth`` generations, choosing child j with
    probability rho_j at every node.  Used to validate the multinomial
    splitting distributionally; O(n * depth) and capped at n <= 1000.
    """
    if n > 1000:
        raise ValueError("per-ball mode is a small-n oracle (n <= 1000)")
    rng = np.random.Generator(np.random.PCG64(ent.derive_seed(ball_seed, 97)))
    counts: dict = {(): n}
    for _ in range(n):
        path = ()
        for _d in range(depth):
            rho = env.split_of(path).masses
            j = int(np.searchsorted(np.cumsum(rho), rng.random(), side="right"))
            j = min(j, rho.size - 1)
            path = path + (j,)
            counts[path] = counts.get(path, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# frontier drivers

class _Budget:
    def __init__(self, limit: int):
        self.limit = int(limit)
        self.visited = 0

    def charge(self, amount: int, generation: int):
        self.visited += int(amount)
        if self.visited > self.limit:
            raise BudgetExceededError(
                f"expansion budget {self.limit} exceeded at generation {generation}",
                generation=generation, visited=self.visited)


def _root_arrays(total: int):
    keys = np.array([ent.root_key()], dtype=np.uint64)
    counts = np.array([total], dtype=np.int64)
    return keys, counts


def heights_multi(occ: OccupancyState, j_list: Iterable[int],
                  budget: int = DEFAULT_BUDGET) -> dict:
    """First generation where every box holds fewer than j balls, per j.

    One pruned pass serves all thresholds: boxes dropped at the smallest j
    can never carry a larger-j box below them (counts are nonincreasing
    along paths).
    """
    j_list = sorted(set(int(j) for j in j_list))
    if not j_list:
        raise ValueError("empty threshold list")
    total = occ.realized_total
    for j in j_list:
        if j < 2 and total > 0:
            raise UnsupportedRegimeError(
                "heights are defined for j >= 2 (a single ball never disperses)")
        if j < 1:
            raise ValueError("thresholds must be positive")
    out = {j: 0 for j in j_list if total < j}
    pend = [j for j in j_list if j not in out]
    if not pend:
        return out
    jmin = min(pend)
    kern = backend_mod.get_backend()
    emix = _as_u64(occ.env._emix)
    bmix = _as_u64(occ._bmix)
    law = occ.env.law
    keys, counts = _root_arrays(total)
    bud = _Budget(budget)
    k = 0
    while keys.size:
        keys, counts, visited = kern.expand_counts(
            keys, counts, emix, bmix, law.law_id, law.param, jmin)
        k += 1
        bud.charge(visited, k)
        topcount = int(counts.max()) if counts.size else 0
        done = [j for j in pend if topcount < j]
        for j in done:
            out[j] = k
        pend = [j for j in pend if j not in out]
        if not pend:
            break
    return out


def height(occ: OccupancyState, j: int, budget: int = DEFAULT_BUDGET) -> int:
    return heights_multi(occ, [j], budget)[int(j)]


def saturation(occ: OccupancyState, j: int, budget: int = DEFAULT_BUDGET) -> int:
    """First generation where some positive-mass box holds fewer than j balls."""
    j = int(j)
    if j < 1:
        raise ValueError("saturation threshold must be >= 1")
    total = occ.realized_total
    if total < j:
        return 0
    kern = backend_mod.get_backend()
    emix = _as_u64(occ.env._emix)
    bmix = _as_u64(occ._bmix)
    law = occ.env.law
    keys, counts = _root_arrays(total)
    bud = _Budget(budget)
    k = 0
    while True:
        keys, counts, visited = kern.expand_counts(
            keys, counts, emix, bmix, law.law_id, law.param, 0)
        k += 1
        bud.charge(visited, k)
        if counts.size == 0 or int(counts.min()) < j:
            return k


def height_and_saturation(occ: OccupancyState, j: int,
                          budget: int = DEFAULT_BUDGET) -> tuple:
    """(height, saturation) for one occupancy at threshold j; G <= H always."""
    h = height(occ, j, budget=budget)
    g = saturation(occ, j, budget=budget)
    return h, g


# ---------------------------------------------------------------------------
# generation statistics

@dataclass
class GenerationStats:
    """Counts, masses and the additive martingale of one generation."""

    k: int
    boxes_expanded: int
    masses: np.ndarray
    counts: Optional[np.ndarray]
    profile: LaplaceProfile
    approximate: bool = False
    pruned_at: Optional[int] = None

    @property
    def p_min(self) -> float:
        return float(self.masses.min()) if self.masses.size else math.nan

    @property
    def p_max(self) -> float:
        return float(self.masses.max()) if self.masses.size else math.nan

    def boxes_with_at_least(self, y: float) -> int:
        """Number of generation-k boxes holding at least y balls."""
        if self.counts is None:
            raise ValueError("ball counts unavailable for an environment-only expansion")
        if self.pruned_at is not None and y < self.pruned_at:
            raise ValueError(
                f"pruned at threshold {self.pruned_at}: counts below it were dropped")
        return int((self.counts >= y).sum())

    def boxes_below(self, y: float) -> int:
        """Number of positive-mass generation-k boxes holding fewer than y balls."""
        if self.counts is None:
            raise ValueError("ball counts unavailable for an environment-only expansion")
        if self.pruned_at is not None:
            raise ValueError("below-threshold counts require a full expansion")
        return int((self.counts < y).sum())

    def martingale(self, theta: float) -> float:
        """L(theta)^-k * sum of mass^theta over the expanded boxes."""
        vals = laplace_eval(self.profile, theta)
        s = float(np.power(self.masses, theta).sum())
        return s * vals.L ** (-self.k)


def _expand_to_generation(env: CascadeEnvironment, k: int,
                          occ: Optional[OccupancyState], keep_min: int,
                          budget: int):
    kern = backend_mod.get_backend()
    emix = _as_u64(env._emix)
    law = env.law
    bud = _Budget(budget)
    keys = np.array([ent.root_key()], dtype=np.uint64)
    masses = np.array([1.0])
    if occ is not None:
        bmix = _as_u64(occ._bmix)
        counts = np.array([occ.realized_total], dtype=np.int64)
        for g in range(k):
            keys, counts, masses, visited = kern.expand_counts_masses(
                keys, counts, masses, emix, bmix, law.law_id, law.param, keep_min)
            bud.charge(visited, g + 1)
        return keys, counts, masses
    for g in range(k):
        keys, masses, visited = kern.expand_masses(
            keys, masses, emix, law.law_id, law.param)
        bud.charge(visited, g + 1)
    return keys, None, masses


def generation_stats(source, k: int, expansion="full",
                     budget: int = DEFAULT_BUDGET) -> GenerationStats:
    """Statistics of generation k.

    ``source`` is an OccupancyState (counts and masses) or a
    CascadeEnvironment (masses only).  ``expansion`` is "full" or
    ("pruned", threshold); a pruned expansion keeps only boxes whose
    ancestors all hold at least ``threshold`` balls, so counts are exact for
    y >= threshold and the mass extremes are bounds flagged approximate.
    """
    if k < 0:
        raise ValueError("generation index must be nonnegative")
    if expansion == "full":
        keep_min, pruned_at = 0, None
    else:
        kind, thr = expansion
        if kind != "pruned" or thr < 1:
            raise ValueError("expansion must be 'full' or ('pruned', threshold >= 1)")
        keep_min, pruned_at = int(thr), int(thr)
    if isinstance(source, OccupancyState):
        occ, env = source, source.env
    else:
        occ, env = None, source
        if keep_min:
            raise ValueError("pruned expansion needs ball counts, pass an OccupancyState")
    keys, counts, masses = _expand_to_generation(env, k, occ, keep_min, budget)
    return GenerationStats(
        k=k, boxes_expanded=int(keys.size), masses=masses, counts=counts,
        profile=env.law.profile(), approximate=pruned_at is not None,
        pruned_at=pruned_at)


def mass_extremes_by_generation(env: CascadeEnvironment, k_max: int,
                                budget: int = DEFAULT_BUDGET):
    """Exact (p_min, p_max) per generation 0..k_max via full expansion."""
    kern = backend_mod.get_backend()
    emix = _as_u64(env._emix)
    law = env.law
    bud = _Budget(budget)
    keys = np.array([ent.root_key()], dtype=np.uint64)
    masses = np.array([1.0])
    p_min = np.empty(k_max + 1)
    p_max = np.empty(k_max + 1)
    p_min[0] = p_max[0] = 1.0
    for g in range(1, k_max + 1):
        keys, masses, visited = kern.expand_masses(
            keys, masses, emix, law.law_id, law.param)
        bud.charge(visited, g)
        p_min[g] = masses.min()
        p_max[g] = masses.max()
    return p_min, p_max


def mass_extremes_beam(env: CascadeEnvironment, k: int,
                       beam_width: int = 1 << 16):
    """Bounds on the generation-k mass extremes via two beams.

    Keeps the ``beam_width`` smallest and largest boxes per generation;
    returns (p_min_bound, p_max_bound, exact) where exact is True when no
    truncation happened (the bounds are then the true extremes).
    """
    kern = backend_mod.get_backend()
    emix = _as_u64(env._emix)
    law = env.law
    lo_keys = hi_keys = np.array([ent.root_key()], dtype=np.uint64)
    lo_m = hi_m = np.array([1.0])
    exact = True
    for _g in range(k):
        lo_keys, lo_m, _ = kern.expand_masses(lo_keys, lo_m, emix, law.law_id, law.param)
        hi_keys, hi_m, _ = kern.expand_masses(hi_keys, hi_m, emix, law.law_id, law.param)
        if lo_m.size > beam_width:
            exact = False
            idx = np.argpartition(lo_m, beam_width)[:beam_width]
            lo_keys, lo_m = lo_keys[idx], lo_m[idx]
        if hi_m.size > beam_width:
            exact = False
            idx = np.argpartition(hi_m, hi_m.size - beam_width)[hi_m.size - beam_width:]
            hi_keys, hi_m = hi_keys[idx], hi_m[idx]
    return float(lo_m.min()), float(hi_m.max()), exact


# ---------------------------------------------------------------------------
# branching-random-walk checks

def martingale_step_check(law: SplittingLaw, theta: float, k: int,
                          resamples: int, env_seed: int, resample_seed: int,
                          budget: int = DEFAULT_BUDGET) -> dict:
    """One-step martingale check for the additive martingale at theta.

    Expands one environment to generation k, then resamples the next
    generation ``resamples`` times with independent entropy and compares the
    Monte Carlo mean of the (k+1)-generation martingale with its
    generation-k value.  Returns observed mean, target, standard error and
    the z-score.
    """
    env = build_environment(law, env_seed)
    keys, _, masses = _expand_to_generation(env, k, None, 0, budget)
    profile = law.profile()
    L = laplace_eval(profile, theta).L
    w_k = float(np.power(masses, theta).sum()) * L ** (-k)
    rs = ent.derive_seed(resample_seed, k, salt=0x5851F42D4C957F2D)
    r_ids = np.arange(resamples, dtype=np.uint64)
    kern_np = backend_mod.get_backend("numpy")
    with np.errstate(over="ignore"):
        rmix = kern_np.mix64(np.uint64(rs) + r_ids * np.uint64(ent.GOLD))
        node_keys = kern_np.mix64(keys[None, :] ^ rmix[:, None])
    u0 = kern_np.stream_unit(node_keys, np.zeros_like(node_keys, dtype=np.int64))
    rho, _ = masses_from_uniforms(law, u0)          # (R, m, b)
    with np.errstate(divide="ignore"):
        pow_rho = np.where(rho > 0.0, rho ** theta, 0.0)
    w_next = (pow_rho.sum(axis=2) @ np.power(masses, theta)) * L ** (-(k + 1))
    mean = float(w_next.mean())
    se = float(w_next.std(ddof=1) / math.sqrt(resamples))
    z = (mean - w_k) / se if se > 0 else 0.0
    return {"theta": theta, "k": k, "target": w_k, "mean": mean, "se": se, "z": z}


def biggins_check(env: CascadeEnvironment, k: int, theta: float,
                  a: float, b: float, budget: int = DEFAULT_BUDGET) -> tuple:
    """Empirical vs predicted count of boxes in a moving mass window.

    Counts generation-k boxes with mass in
    [exp(-b + k L'/L), exp(-a + k L'/L)] and compares with the classical
    branching-random-walk window density, with the limiting martingale
    replaced by its generation-k value (their gap vanishes in k).
    """
    if a > b:
        raise ValueError("need a <= b")
    law = env.law
    if law.lattice:
        raise LatticeLawError(f"{law.name} is lattice; window counts oscillate")
    profile = law.profile()
    vals = laplace_eval(profile, theta)
    gap = math.log(vals.L) - theta * vals.dL / vals.L
    if gap <= 0.0:
        raise ProfileDomainError(
            f"theta={theta} is outside the window regime (tangent intercept <= 0)")
    keys, _, masses = _expand_to_generation(env, k, None, 0, budget)
    drift = k * vals.dL / vals.L
    lo = math.exp(-b + drift)
    hi = math.exp(-a + drift)
    empirical = int(((masses >= lo) & (masses <= hi)).sum())
    if a == b:
        return empirical, 0.0
    w_k = float(np.power(masses, theta).sum()) * vals.L ** (-k)
    curvature = vals.d2L / vals.L - (vals.dL / vals.L) ** 2
    predicted = (math.exp(k * gap) / math.sqrt(k)
                 * (math.exp(theta * b) - math.exp(theta * a)) / theta
                 / math.sqrt(2.0 * math.pi) / math.sqrt(curvature) * w_k)
    return empirical, predicted


def poisson_tail(x: float, j: int) -> float:
    """P(Poisson(x) >= j), exact via the regularized incomplete gamma."""
    if not x > 0.0:
        raise ValueError("x must be positive")
    j = int(j)
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j == 0:
        return 1.0
    return float(sps.gammainc(j, x))
