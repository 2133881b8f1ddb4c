"""Critical exponents and asymptotic height/saturation constants.

Everything is driven by the log-Laplace transform psi = ln L of a splitting
law.  The key scalar is the y-intercept of the tangent of psi at theta,

    tangent_intercept(theta) = ln L(theta) - theta L'(theta) / L(theta),

which is increasing left of 0 and decreasing right of 0; its positivity
interval (theta_star_lower, theta_star_upper) delimits the regime where the
additive martingale is uniformly integrable.  Heights grow like
C_j ln n with C_j = -j / ln L(j) below the upper exponent and like
c_upper ln n at or above it; saturation levels grow like c_lower ln n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import (InconclusiveRootError, LatticeLawError, ProfileDomainError,
                     StabilizationError, UnsupportedRegimeError)
from .laws import LaplaceProfile, laplace_eval

THETA_MAX = 128.0
SUPNORM_CUTOFF = 0.99
ROOT_XTOL = 1e-12
BOUNDARY_GUARD = 1e-9
STABILIZE_RTOL = 1e-6
RESIDUAL_TOL = 1e-8


class CriticalExponents(NamedTuple):
    lower: float
    upper: float
    residual_lower: Optional[float]
    residual_upper: Optional[float]


@dataclass(frozen=True)
class CriticalConstants:
    """Critical exponents, limit constants and hypothesis flags of one law."""

    theta_star_lower: float
    theta_star_upper: float
    c_lower: float
    c_upper: float
    hyp2: str
    hyp3: str
    residuals: dict

    def __post_init__(self):
        if not (self.c_lower > 0.0 and self.c_upper > 0.0):
            raise ValueError("limit constants must be positive")
        if not self.c_lower < self.c_upper:
            raise ValueError("saturation constant must lie below the height constant")


def tangent_intercept(profile: LaplaceProfile, theta: float) -> float:
    """ln L(theta) - theta L'(theta)/L(theta): the tangent's y-intercept."""
    return _intercept_and_floor(profile, theta)[0]


def _intercept_and_floor(profile: LaplaceProfile, theta: float) -> tuple:
    # floor: the round-off scale of the cancellation ln L - theta L'/L; a
    # value inside +-floor carries no trustworthy sign (at large theta the
    # true intercept of a bounded-atom law sinks below this scale)
    vals = laplace_eval(profile, theta)
    if not (vals.L > 0.0 and math.isfinite(vals.L)):
        raise ProfileDomainError(f"transform not finite and positive at theta={theta}")
    a = math.log(vals.L)
    b = theta * vals.dL / vals.L
    floor = 64.0 * 2.220446049250313e-16 * (abs(a) + abs(b) + 1.0)
    return a - b, floor


def _bisect(f, lo: float, hi: float, increasing: bool):
    # sign change bracketed: f(lo), f(hi) already evaluated by the caller
    for _ in range(200):
        if hi - lo <= ROOT_XTOL * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        v = f(mid)
        pos = v > 0.0
        if pos == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_exponents(profile: LaplaceProfile, theta_max: float = THETA_MAX,
                       supnorm_cutoff: float = SUPNORM_CUTOFF) -> CriticalExponents:
    """Endpoints of the positivity interval of the tangent intercept.

    The upper endpoint is found by doubling from theta = 1 and bisecting the
    sign change (the intercept decreases there); if the intercept stays
    positive up to ``theta_max``, L(theta_max)^(1/theta_max) decides between
    a genuine +inf (essential sup of the largest atom below 1) and an
    inconclusive probe.  The lower endpoint mirrors this toward the domain
    boundary, or probes a doubling ray when the boundary is -inf.
    """
    if profile.lattice:
        raise LatticeLawError("critical exponents are undefined for lattice laws")
    f = lambda t: tangent_intercept(profile, t)
    if not f(1.0) > 0.0:
        raise InconclusiveRootError("degenerate transform: tangent intercept at 1 is not positive")

    # upper exponent: a bracket counts only when its negative end clears the
    # round-off floor, otherwise the flat tail of a +inf law would fake roots
    lo, hi = 1.0, 2.0
    upper = None
    while True:
        if hi > theta_max:
            s = _supnorm_probe(profile, theta_max)
            if s <= supnorm_cutoff:
                upper, res_upper = math.inf, None
            else:
                raise InconclusiveRootError(
                    f"no decisive sign change up to theta={theta_max} and "
                    f"L^(1/theta)={s:.6f} suggests a finite exponent beyond the probe bound")
            break
        v, fl = _intercept_and_floor(profile, hi)
        if v < -fl:
            root = _bisect(f, lo, hi, increasing=False)
            upper, res_upper = root, abs(f(root))
            break
        lo, hi = hi, hi * 2.0

    # lower exponent
    tl = profile.theta_lower
    if tl >= 0.0:
        # the intercept is positive on (tl, 1], so its positivity interval
        # starts at the domain boundary itself
        lower, res_lower = tl, None
    elif math.isinf(tl):
        prev = 0.0
        probe = -1.0
        lower, res_lower = -math.inf, None
        while probe >= -theta_max:
            v, fl = _intercept_and_floor(profile, probe)
            if v < -fl:
                root = _bisect(f, probe, prev, increasing=True)
                lower, res_lower = root, abs(f(root))
                break
            prev, probe = probe, probe * 2.0
    else:
        guard = BOUNDARY_GUARD * max(1.0, abs(tl))
        prev = 0.0
        probe = tl + 0.5 * (0.0 - tl)
        lower, res_lower = tl, None
        while probe - tl > guard:
            v, fl = _intercept_and_floor(profile, probe)
            if v < -fl:
                root = _bisect(f, probe, prev, increasing=True)
                lower, res_lower = root, abs(f(root))
                break
            prev = probe
            probe = tl + 0.5 * (probe - tl)
    return CriticalExponents(lower, upper, res_lower, res_upper)


def _supnorm_probe(profile: LaplaceProfile, theta_max: float) -> float:
    vals = laplace_eval(profile, theta_max)
    if vals.L <= 0.0:
        return 0.0
    return math.exp(math.log(vals.L) / theta_max)


def _ratio(profile: LaplaceProfile, theta: float) -> float:
    vals = laplace_eval(profile, theta)
    return -vals.L / vals.dL


def _stabilized_limit(profile: LaplaceProfile, sign: float, theta_max: float,
                      rtol: float) -> float:
    # -L/L' along the geometric ray sign * {8, 16, ..., theta_max}
    theta = 8.0
    prev = _ratio(profile, sign * theta)
    while theta * 2.0 <= theta_max:
        theta *= 2.0
        cur = _ratio(profile, sign * theta)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise StabilizationError(
        f"-L/L' has not stabilized to {rtol:g} relative by theta={sign * theta:g}")


def check_hypotheses(profile: LaplaceProfile,
                     exponents: CriticalExponents) -> tuple:
    """Tri-state flags for the two regularity hypotheses.

    The first needs a finite negative-theta moment and a (1+delta)-moment of
    the atom count: with the finite support bound every law here has the
    latter, so the flag reduces to the sign of the domain boundary.  The
    second needs a finite negative lower exponent attained as a root.
    """
    hyp2 = "holds" if profile.theta_lower < 0.0 else "fails"
    lo = exponents.lower
    if math.isinf(lo) or lo >= 0.0:
        hyp3 = "fails"
    elif exponents.residual_lower is not None and exponents.residual_lower <= RESIDUAL_TOL:
        hyp3 = "holds"
    else:
        hyp3 = "unknown"
    return hyp2, hyp3


def limit_constants(profile: LaplaceProfile, exponents: CriticalExponents,
                    theta_max: float = THETA_MAX,
                    rtol: float = STABILIZE_RTOL) -> CriticalConstants:
    """Limits of -L/L' at the two exponents, plus hypothesis flags.

    At a finite root the ratio is evaluated there (and cross-checked against
    -theta/ln L, the two expressions coincide at a root); at an infinite
    exponent the ratio is followed along a geometric ray until it stabilizes.
    """
    lower, upper = exponents.lower, exponents.upper
    if math.isinf(upper):
        c_upper = _stabilized_limit(profile, +1.0, theta_max, rtol)
    else:
        c_upper = _ratio(profile, upper)
        vals = laplace_eval(profile, upper)
        alt = -upper / math.log(vals.L)
        if abs(c_upper - alt) > 1e-9 * abs(c_upper):
            raise StabilizationError(
                "the two height-constant expressions disagree at the located root; "
                f"got {c_upper!r} vs {alt!r}")
    if math.isinf(lower):
        c_lower = _stabilized_limit(profile, -1.0, theta_max, rtol)
    elif lower > profile.theta_lower:
        c_lower = _ratio(profile, lower)
    else:
        guard = BOUNDARY_GUARD * max(1.0, abs(lower))
        c_lower = _ratio(profile, lower + guard)
    hyp2, hyp3 = check_hypotheses(profile, exponents)
    return CriticalConstants(
        theta_star_lower=lower, theta_star_upper=upper,
        c_lower=c_lower, c_upper=c_upper, hyp2=hyp2, hyp3=hyp3,
        residuals={"lower": exponents.residual_lower,
                   "upper": exponents.residual_upper})


def compute_constants(profile: LaplaceProfile, theta_max: float = THETA_MAX,
                      supnorm_cutoff: float = SUPNORM_CUTOFF) -> CriticalConstants:
    """critical_exponents followed by limit_constants."""
    exps = critical_exponents(profile, theta_max=theta_max,
                              supnorm_cutoff=supnorm_cutoff)
    return limit_constants(profile, exps, theta_max=theta_max)


def height_constant(constants: CriticalConstants, profile: LaplaceProfile,
                    mode: tuple) -> float:
    """Slope of the height against ln n.

    mode ("fixed", j): -j/ln L(j) below the upper exponent, the saturated
    constant at or above it (the phase transition).  mode ("power", alpha):
    (1 - alpha) times the saturated constant; needs a finite upper exponent.
    """
    kind, value = mode
    if kind == "fixed":
        j = int(value)
        if j < 2:
            raise ValueError("height thresholds start at j = 2")
        if j < constants.theta_star_upper:
            vals = laplace_eval(profile, float(j))
            return -j / math.log(vals.L)
        return constants.c_upper
    if kind == "power":
        alpha = float(value)
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if math.isinf(constants.theta_star_upper):
            raise UnsupportedRegimeError(
                "power-threshold heights need a finite upper exponent")
        return (1.0 - alpha) * constants.c_upper
    raise ValueError(f"unknown mode {mode!r}")


def saturation_constant(constants: CriticalConstants, mode: tuple) -> float:
    """Slope of the saturation level against ln n (no phase transition).

    Valid when the lower exponent is -inf or is a genuine negative root
    (hypothesis flag holds); the power regime needs the root case.
    """
    kind, value = mode
    root_case = constants.hyp3 == "holds"
    ray_case = math.isinf(constants.theta_star_lower)
    if not (root_case or ray_case):
        raise UnsupportedRegimeError(
            "saturation asymptotics need theta_star_lower = -inf or a negative root "
            f"(hyp3={constants.hyp3})")
    if kind == "fixed":
        j = int(value)
        if j < 1:
            raise ValueError("saturation thresholds start at j = 1")
        return constants.c_lower
    if kind == "power":
        if not root_case:
            raise UnsupportedRegimeError(
                "power-threshold saturation additionally needs the root case (hyp3)")
        alpha = float(value)
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        return (1.0 - alpha) * constants.c_lower
    raise ValueError(f"unknown mode {mode!r}")
