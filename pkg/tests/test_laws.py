"""Splitting laws, their samplers and Laplace transforms."""

import math

import mpmath as mp
import numpy as np
import pytest

import boxcascade as bc
from boxcascade.laws import masses_from_uniforms

mp.mp.dps = 30

ALL_LAWS = [bc.uniform_stick(), bc.dirac_half(), bc.two_three_mixture(0.5),
            bc.law_075u(), bc.heavytail()]


class StubStream:
    def __init__(self, values):
        self.values = list(values)

    def uniform(self):
        return self.values.pop(0)


# ---------------------------------------------------------------------------
# samplers

def test_sample_split_dirac_any_entropy():
    mv = bc.sample_split(bc.dirac_half(), StubStream([0.123]))
    assert list(mv.masses) == [0.5, 0.5]


def test_sample_split_uniform_stick_definitional():
    mv = bc.sample_split(bc.uniform_stick(), StubStream([0.3]))
    assert list(mv.masses) == [0.3, 0.7]


def test_sample_split_mixture_ternary_branch():
    mv = bc.sample_split(bc.two_three_mixture(0.5), StubStream([0.9]))
    assert np.allclose(mv.masses, [1 / 3, 1 / 3, 1 / 3], atol=0, rtol=0)
    mv2 = bc.sample_split(bc.two_three_mixture(0.5), StubStream([0.1]))
    assert list(mv2.masses) == [0.5, 0.5]


def test_sample_split_deterministic_replay():
    for law in ALL_LAWS:
        s1 = bc.KeyedStream(987654321)
        s2 = bc.KeyedStream(987654321)
        a = bc.sample_split(law, s1).masses
        b = bc.sample_split(law, s2).masses
        assert np.array_equal(a, b)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name)
def test_mass_vector_invariants_bulk(law, rng):
    u = rng.random(1_000_000)
    masses, widths = masses_from_uniforms(law, u)
    assert masses.shape[1] == law.support_bound
    assert np.all(widths <= law.support_bound)
    assert np.all(masses >= 0.0) and np.all(masses <= 1.0)
    assert np.abs(masses.sum(axis=1) - 1.0).max() <= 1e-12


def test_mass_vector_validation_errors():
    with pytest.raises(ValueError):
        bc.MassVector(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        bc.MassVector(np.array([1.2, -0.2]))
    with pytest.raises(ValueError):
        bc.MassVector(np.array([[0.5, 0.5]]))


def test_heavytail_atom_support():
    u = np.random.default_rng(5).random(100_000)
    masses, _ = masses_from_uniforms(bc.heavytail(), u)
    assert masses[:, 0].max() < math.exp(-1.0)
    # masses below exp(-745) underflow to an exact zero; such children are
    # treated as absent boxes, the sibling then carries the full mass
    tiny = masses[:, 0] == 0.0
    assert tiny.mean() < 0.01
    assert np.all(u[tiny] < 1.0 / 700.0)
    assert np.all(masses[tiny, 1] == 1.0)


# ---------------------------------------------------------------------------
# transforms

def test_laplace_unit_at_one_exactly():
    for law in ALL_LAWS:
        if law.closed_form is not None:
            assert bc.laplace_eval(law.closed_form, 1.0).L == 1.0


def test_laplace_eval_examples():
    us = bc.uniform_stick().closed_form
    v = bc.laplace_eval(us, 1.0)
    assert v.L == 1.0
    v0 = bc.laplace_eval(us, 0.0)
    assert v0.L == 2.0 and v0.dL == -2.0
    assert bc.laplace_eval(bc.dirac_half().closed_form, 2.0).L == 0.5
    assert bc.laplace_eval(bc.two_three_mixture(0.5).closed_form, 1.0).L == 1.0


def test_laplace_domain_error():
    us = bc.uniform_stick().closed_form
    with pytest.raises(bc.ProfileDomainError):
        bc.laplace_eval(us, -1.0)
    with pytest.raises(bc.ProfileDomainError):
        bc.laplace_eval(bc.heavytail().profile(), 0.0)


@pytest.mark.parametrize("law", [l for l in ALL_LAWS if l.closed_form is not None],
                         ids=lambda l: l.name)
def test_closed_form_derivatives_against_quadrature(law):
    # independent oracle: numerically differentiate a high-precision L
    def L(theta):
        theta = mp.mpf(theta)
        if law.law_id == 0:
            return 2 / (theta + 1)
        if law.law_id == 1:
            return 2 ** (1 - theta)
        if law.law_id == 2:
            a = mp.mpf(law.param)
            return a * 2 ** (1 - theta) + (1 - a) * 3 ** (1 - theta)
        return ((1 - mp.mpf('0.25') ** (theta + 1)) / (mp.mpf('0.75') * (theta + 1))
                + mp.mpf('0.75') * mp.mpf('0.05') ** (theta - 1) / (theta + 1))

    lo = law.theta_lower
    grid = [lo / 2 + 0.25 if math.isfinite(lo) else -3.0, 0.5, 1.0, 2.0, 5.0, 8.0]
    for theta in grid:
        got = bc.laplace_eval(law.closed_form, theta)
        want = (L(theta), mp.diff(L, theta), mp.diff(L, theta, 2))
        for g, w in zip((got.L, got.dL, got.d2L), want):
            assert abs(g - float(w)) <= 1e-12 * max(1.0, abs(float(w)))


@pytest.mark.parametrize("law", [l for l in ALL_LAWS if l.closed_form is not None],
                         ids=lambda l: l.name)
def test_monte_carlo_agrees_with_closed_form(law):
    # grid stays above theta_lower / 2 so the estimator variance is finite
    prof = law.monte_carlo_profile(samples=400_000, seed=9,
                                   theta_lower=law.theta_lower)
    lo = law.theta_lower
    start = lo / 2 + 0.05 if math.isfinite(lo) else -2.0
    grid = sorted(set([start, 0.5, 1.0, 2.0, 4.0, 8.0]))
    for theta in grid:
        mc = bc.laplace_eval(prof, theta)
        ex = bc.laplace_eval(law.closed_form, theta)
        assert abs(mc.L - ex.L) <= max(4 * mc.se_L, 1e-12)
        assert abs(mc.dL - ex.dL) <= max(4 * mc.se_dL, 1e-12)
        assert abs(mc.d2L - ex.d2L) <= max(4 * mc.se_d2L, 1e-12)


def test_monte_carlo_unit_mean_at_one():
    prof = bc.heavytail().profile()
    v = bc.laplace_eval(prof, 1.0)
    assert abs(v.L - 1.0) <= max(4 * v.se_L, 1e-12)


def test_monte_carlo_determinism():
    p1 = bc.heavytail(samples=50_000, seed=3).profile()
    p2 = bc.heavytail(samples=50_000, seed=3).profile()
    assert p1.eval(2.0) == p2.eval(2.0)


def test_monte_carlo_divergence_heuristic():
    # declaring a boundary below the truth exposes an infinite expectation
    law = bc.heavytail(samples=100_000, seed=4)
    prof = law.monte_carlo_profile(theta_lower=-0.5)
    with pytest.raises(bc.EstimateDivergedError):
        bc.laplace_eval(prof, -0.3)


@pytest.mark.parametrize("law", [l for l in ALL_LAWS if l.closed_form is not None],
                         ids=lambda l: l.name)
def test_transform_monotone_and_log_convex(law):
    prof = law.closed_form
    lo = law.theta_lower
    start = lo + 0.05 if math.isfinite(lo) else -6.0
    grid = np.linspace(start, 8.0, 60)
    vals = np.array([bc.laplace_eval(prof, t).L for t in grid])
    assert np.all(vals > 0.0) and np.all(np.isfinite(vals))
    assert np.all(np.diff(vals) < 0.0)
    lnv = np.log(vals)
    mid = lnv[1:-1]
    chord = 0.5 * (lnv[:-2] + lnv[2:])
    assert np.all(mid <= chord + 1e-12)
