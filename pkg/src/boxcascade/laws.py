"""Splitting laws: random mass partitions and their Laplace transforms.

A splitting law describes how a box divides its mass among finitely many
children.  Each built-in law draws its partition from a single uniform, so
samplers are pure functions of one entropy word and vectorize trivially.

Transforms: ``L(theta) = E[sum_j rho_j^theta]`` with the convention
``0^theta = 0`` for every theta.  Closed-form profiles carry exact first and
second derivatives; Monte Carlo profiles reuse one frozen sample set for all
theta, so the estimate is itself a genuine (smooth, log-convex) Laplace
transform of an empirical measure and can be root-found reliably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import entropy as ent
from .errors import EstimateDivergedError, ProfileDomainError

MASS_ATOL = 1e-12

LN2 = math.log(2.0)
LN3 = math.log(3.0)


class LaplaceValues(NamedTuple):
    """Transform value and derivatives at one theta (standard errors for
    Monte Carlo sources, None otherwise)."""

    L: float
    dL: float
    d2L: float
    se_L: Optional[float] = None
    se_dL: Optional[float] = None
    se_d2L: Optional[float] = None


@dataclass(frozen=True)
class MassVector:
    """A sampled mass partition: nonnegative entries summing to one."""

    masses: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.masses, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("mass vector must be a nonempty 1-d sequence")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("mass entries must lie in [0, 1]")
        if abs(float(arr.sum()) - 1.0) > MASS_ATOL:
            raise ValueError("mass entries must sum to 1 within 1e-12")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "masses", arr)

    def __len__(self):
        return self.masses.size

    def __iter__(self):
        return iter(self.masses)


class KeyedStream:
    """Counter-based uniform stream: the t-th draw depends only on (key, t)."""

    def __init__(self, key: int):
        self.key = key & ent.MASK64
        self._t = 0

    def uniform(self) -> float:
        u = ent.stream_unit(self.key, self._t)
        self._t += 1
        return u


@dataclass(frozen=True)
class LaplaceProfile:
    """Evaluable Laplace transform with declared domain boundary."""

    theta_lower: float
    lattice: bool
    support_bound: int
    source: str

    def eval(self, theta: float) -> LaplaceValues:
        raise NotImplementedError

    def eval_checked(self, theta: float) -> LaplaceValues:
        if not theta > self.theta_lower:
            raise ProfileDomainError(
                f"theta={theta} is not above the domain boundary {self.theta_lower}")
        return self.eval(theta)


@dataclass(frozen=True)
class ClosedFormProfile(LaplaceProfile):
    fn: Callable[[float], tuple] = None

    def eval(self, theta: float) -> LaplaceValues:
        L, dL, d2L = self.fn(theta)
        return LaplaceValues(L, dL, d2L)


def _divergence_guard(values: np.ndarray, what: str, batches: int = 20) -> None:
    # running-mean heuristic: cumulative means that keep growing by a large
    # factor across batches indicate an infinite expectation
    m = values.shape[0]
    if m < 4 * batches:
        return
    per = m // batches
    sums = np.add.reduceat(np.abs(values[: per * batches]), np.arange(0, per * batches, per))
    cum = np.cumsum(sums) / (per * np.arange(1, batches + 1))
    half = cum[batches // 2 - 1]
    quarter = cum[batches // 4 - 1]
    if half > 0 and cum[-1] > 4.0 * half and half > quarter:
        raise EstimateDivergedError(
            f"running mean of {what} keeps growing across batches "
            f"({quarter:.4g} -> {half:.4g} -> {cum[-1]:.4g}); "
            "the expectation looks infinite at this theta")


@dataclass(frozen=True)
class MonteCarloProfile(LaplaceProfile):
    """Transform of the empirical measure of a frozen sample of partitions.

    The same ``samples`` partitions (seeded by ``seed``) are reused at every
    theta; standard errors of all three components are reported.
    The boundary ``theta_lower`` must be declared by the caller, it is never
    estimated from samples.
    """

    law: "SplittingLaw" = None
    samples: int = 200_000
    seed: int = 1
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def _matrices(self):
        if "mass" not in self._cache:
            rng = np.random.Generator(np.random.PCG64(self.seed))
            u = rng.random(self.samples)
            masses, _ = masses_from_uniforms(self.law, u)
            pos = masses > 0.0
            logm = np.where(pos, np.log(np.where(pos, masses, 1.0)), 0.0)
            self._cache["mass"] = masses
            self._cache["log"] = logm
            self._cache["pos"] = pos
        return self._cache["mass"], self._cache["log"], self._cache["pos"]

    def eval(self, theta: float) -> LaplaceValues:
        masses, logm, pos = self._matrices()
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            powm = np.where(pos, np.exp(theta * logm), 0.0)
        s0 = powm.sum(axis=1)
        s1 = (powm * logm).sum(axis=1)
        s2 = (powm * logm * logm).sum(axis=1)
        _divergence_guard(s0, "L")
        _divergence_guard(s2, "L''")
        m = float(self.samples)
        out = []
        for s in (s0, s1, s2):
            out.append(float(s.mean()))
            out.append(float(s.std(ddof=1) / math.sqrt(m)))
        return LaplaceValues(out[0], out[2], out[4], out[1], out[3], out[5])


@dataclass(frozen=True)
class SplittingLaw:
    """A samplable random mass partition with finite support bound."""

    name: str
    support_bound: int
    law_id: int
    param: float
    lattice: bool
    theta_lower: float
    closed_form: Optional[LaplaceProfile]
    mc_samples: int = 200_000
    mc_seed: int = 1

    def sample(self, stream) -> MassVector:
        """Draw one partition from an entropy stream (one uniform consumed)."""
        u0 = stream.uniform()
        return MassVector(_masses_scalar(self.law_id, self.param, u0))

    def profile(self) -> LaplaceProfile:
        """Preferred transform: closed form when available, else Monte Carlo."""
        if self.closed_form is not None:
            return self.closed_form
        return self.monte_carlo_profile()

    def monte_carlo_profile(self, samples: Optional[int] = None,
                            seed: Optional[int] = None,
                            theta_lower: Optional[float] = None) -> MonteCarloProfile:
        return MonteCarloProfile(
            theta_lower=self.theta_lower if theta_lower is None else theta_lower,
            lattice=self.lattice,
            support_bound=self.support_bound,
            source="monte-carlo",
            law=self,
            samples=self.mc_samples if samples is None else samples,
            seed=self.mc_seed if seed is None else seed,
        )


def sample_split(law: SplittingLaw, stream) -> MassVector:
    return law.sample(stream)


def laplace_eval(profile: LaplaceProfile, theta: float) -> LaplaceValues:
    """(L, L', L'') at theta, with standard errors for Monte Carlo sources."""
    return profile.eval_checked(theta)


def _masses_scalar(law_id: int, param: float, u0: float) -> np.ndarray:
    if law_id == ent.LAW_UNIFORM_STICK:
        return np.array([u0, 1.0 - u0])
    if law_id == ent.LAW_DIRAC_HALF:
        return np.array([0.5, 0.5])
    if law_id == ent.LAW_MIX23:
        if u0 < param:
            return np.array([0.5, 0.5])
        return np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
    if law_id == ent.LAW_075U:
        out = np.full(16, 0.05 * u0)
        out[0] = 1.0 - 0.75 * u0
        return out
    r = math.exp(-1.0 / u0)
    return np.array([r, 1.0 - r])


def masses_from_uniforms(law: SplittingLaw, u: np.ndarray):
    """Vectorized sampler: one partition per uniform.

    Returns (masses, widths) where masses has a trailing axis of size
    ``law.support_bound`` padded with zeros.
    """
    u = np.asarray(u, dtype=np.float64)
    b = law.support_bound
    out = np.zeros(u.shape + (b,))
    law_id = law.law_id
    if law_id == ent.LAW_UNIFORM_STICK:
        out[..., 0] = u
        out[..., 1] = 1.0 - u
        widths = np.full(u.shape, 2, dtype=np.int64)
    elif law_id == ent.LAW_DIRAC_HALF:
        out[..., 0] = 0.5
        out[..., 1] = 0.5
        widths = np.full(u.shape, 2, dtype=np.int64)
    elif law_id == ent.LAW_MIX23:
        binary = u < law.param
        third = 1.0 / 3.0
        out[..., 0] = np.where(binary, 0.5, third)
        out[..., 1] = np.where(binary, 0.5, third)
        out[..., 2] = np.where(binary, 0.0, third)
        widths = np.where(binary, 2, 3).astype(np.int64)
    elif law_id == ent.LAW_075U:
        out[..., 0] = 1.0 - 0.75 * u
        out[..., 1:] = (0.05 * u)[..., None]
        widths = np.full(u.shape, 16, dtype=np.int64)
    else:
        r = np.exp(-1.0 / u)
        out[..., 0] = r
        out[..., 1] = 1.0 - r
        widths = np.full(u.shape, 2, dtype=np.int64)
    return out, widths


# ---------------------------------------------------------------------------
# built-in laws

def _uniform_stick_transform(theta: float):
    t = theta + 1.0
    return 2.0 / t, -2.0 / (t * t), 4.0 / (t * t * t)


def _dirac_half_transform(theta: float):
    L = 2.0 ** (1.0 - theta)
    return L, -LN2 * L, LN2 * LN2 * L


def _mix23_transform(alpha: float):
    def fn(theta: float):
        a = alpha * 2.0 ** (1.0 - theta)
        b = (1.0 - alpha) * 3.0 ** (1.0 - theta)
        return a + b, -(a * LN2 + b * LN3), a * LN2 * LN2 + b * LN3 * LN3
    return fn


_LN_QUARTER = math.log(0.25)
_LN_NICKEL = math.log(0.05)


def _law075u_transform(theta: float):
    # L = (1 - 0.25^(theta+1)) / (0.75 (theta+1)) + 0.75 * 0.05^(theta-1) / (theta+1)
    t = theta + 1.0
    e = 0.25 ** t
    g = 1.0 - e
    a = g / (0.75 * t)
    da = (-_LN_QUARTER * e * t - g) / (0.75 * t * t)
    d2a = (-_LN_QUARTER * _LN_QUARTER * e * t * t
           + 2.0 * _LN_QUARTER * e * t + 2.0 * g) / (0.75 * t * t * t)
    bb = 0.75 * 0.05 ** (theta - 1.0) / t
    db = bb * (_LN_NICKEL - 1.0 / t)
    d2b = bb * ((_LN_NICKEL - 1.0 / t) ** 2 + 1.0 / (t * t))
    return a + bb, da + db, d2a + d2b


def uniform_stick() -> SplittingLaw:
    """(U, 1-U) with U uniform on (0, 1)."""
    return SplittingLaw(
        name="uniform-stick", support_bound=2, law_id=ent.LAW_UNIFORM_STICK,
        param=0.0, lattice=False, theta_lower=-1.0,
        closed_form=ClosedFormProfile(
            theta_lower=-1.0, lattice=False, support_bound=2,
            source="closed-form", fn=_uniform_stick_transform))


def dirac_half() -> SplittingLaw:
    """Deterministic (1/2, 1/2): lattice, simulable but outside the
    asymptotic-constant routines."""
    return SplittingLaw(
        name="dirac-half", support_bound=2, law_id=ent.LAW_DIRAC_HALF,
        param=0.0, lattice=True, theta_lower=-math.inf,
        closed_form=ClosedFormProfile(
            theta_lower=-math.inf, lattice=True, support_bound=2,
            source="closed-form", fn=_dirac_half_transform))


def two_three_mixture(alpha: float = 0.5) -> SplittingLaw:
    """(1/2, 1/2) with probability alpha, (1/3, 1/3, 1/3) otherwise."""
    if not 0.5 <= alpha < 1.0:
        raise ValueError("alpha must lie in [1/2, 1)")
    return SplittingLaw(
        name=f"mix23:alpha={alpha:g}", support_bound=3, law_id=ent.LAW_MIX23,
        param=float(alpha), lattice=False, theta_lower=-math.inf,
        closed_form=ClosedFormProfile(
            theta_lower=-math.inf, lattice=False, support_bound=3,
            source="closed-form", fn=_mix23_transform(float(alpha))))


def law_075u() -> SplittingLaw:
    """rho_1 = 1 - 0.75 U and fifteen equal atoms 0.05 U."""
    return SplittingLaw(
        name="law075u", support_bound=16, law_id=ent.LAW_075U,
        param=0.0, lattice=False, theta_lower=-1.0,
        closed_form=ClosedFormProfile(
            theta_lower=-1.0, lattice=False, support_bound=16,
            source="closed-form", fn=_law075u_transform))


def heavytail(samples: int = 200_000, seed: int = 1) -> SplittingLaw:
    """(rho_1, 1 - rho_1) with rho_1 = exp(-1/U): density x^-1 ln^-2 x on
    (0, 1/e).  No closed-form transform; domain boundary 0 is declared."""
    if samples < 1000:
        raise ValueError("heavytail profile needs at least 1000 samples")
    return SplittingLaw(
        name=f"heavytail:samples={samples},seed={seed}", support_bound=2,
        law_id=ent.LAW_HEAVYTAIL, param=0.0, lattice=False, theta_lower=0.0,
        closed_form=None, mc_samples=int(samples), mc_seed=int(seed))


def parse_law_spec(spec: str) -> SplittingLaw:
    """Parse a CLI law spec.

    Grammar: ``uniform-stick`` | ``dirac-half`` | ``mix23:alpha=<f>`` |
    ``law075u`` | ``heavytail:samples=<n>,seed=<u64>`` (heavytail parameters
    optional, defaults samples=200000 seed=1).
    """
    spec = spec.strip()
    head, _, tail = spec.partition(":")
    kv = {}
    if tail:
        for part in tail.split(","):
            k, eq, v = part.partition("=")
            if not eq:
                raise ValueError(f"malformed law option {part!r} in {spec!r}")
            kv[k.strip()] = v.strip()
    if head == "uniform-stick":
        _expect_no_options(spec, kv)
        return uniform_stick()
    if head == "dirac-half":
        _expect_no_options(spec, kv)
        return dirac_half()
    if head == "law075u":
        _expect_no_options(spec, kv)
        return law_075u()
    if head == "mix23":
        try:
            alpha = float(kv.pop("alpha"))
        except KeyError:
            raise ValueError("mix23 requires alpha, e.g. mix23:alpha=0.5") from None
        _expect_no_options(spec, kv)
        return two_three_mixture(alpha)
    if head == "heavytail":
        samples = int(kv.pop("samples", 200_000))
        seed = int(kv.pop("seed", 1))
        _expect_no_options(spec, kv)
        return heavytail(samples=samples, seed=seed)
    raise ValueError(f"unknown law {spec!r}")


def _expect_no_options(spec, kv):
    if kv:
        raise ValueError(f"unexpected options {sorted(kv)} in law spec {spec!r}")


BUILTIN_LAWS = ("uniform-stick", "dirac-half", "mix23:alpha=0.5", "law075u",
                "heavytail:samples=200000,seed=1")
