import math

import pytest
from hypothesis import given, strategies as st

from perturbeuler.classifier import (
    Criterion,
    Verdict,
    blowup_time_quadrature,
    classify,
    energy,
    escape_speed,
    velocity_gradient_blowup_check,
)
from perturbeuler.errors import NotABlowupSeed, NotABlowupTrajectory
from perturbeuler.ode_core import ModelParams, SeedData, integrate

P3 = ModelParams(1.0, 3.0)


@pytest.mark.parametrize("seed, params, expected", [
    (SeedData(1.0, 2.0, 0.0), ModelParams(1.0, 2.0), 2.0),
    (SeedData(1.0, 0.0, -1.0), P3, -0.5),
    (SeedData(1.0, 1.0, -1.0), P3, 0.0),
])
def test_energy_examples(seed, params, expected):
    assert energy(seed, params) == expected


def test_threshold_equals_zero_energy():
    assert escape_speed(-1.0, 1.0, 3.0) == 1.0
    seed = SeedData(1.0, 1.0, -1.0)
    cls = classify(seed, P3)
    assert cls.verdict is Verdict.GLOBAL and cls.criterion is Criterion.XI_NEG_ESCAPE


def test_classify_examples():
    c = classify(SeedData(1.0, -2.0, 0.0), ModelParams(1.0, 2.0))
    assert c.verdict is Verdict.BLOWUP_FINITE_TIME and c.T_formula == 0.5
    assert c.criterion is Criterion.XI_ZERO_CONTRACTING
    assert classify(SeedData(1.0, 0.5, -1.0), P3).blowup
    assert not classify(SeedData(1.0, 2.0, -1.0), P3).blowup
    assert classify(SeedData(1.0, 0.0, 0.0), P3).criterion is Criterion.XI_ZERO_NONCONTRACTING


@given(a0=st.floats(0.01, 100), a1=st.floats(-100, 100), gamma=st.floats(1.05, 5))
def test_positive_xi_is_global(a0, a1, gamma):
    c = classify(SeedData(a0, a1, 1.0), ModelParams(1.0, gamma))
    assert c.verdict is Verdict.GLOBAL and c.criterion is Criterion.XI_POS


@given(b0=st.floats(-10, 10), b1=st.floats(-10, 10), alpha=st.floats(0, 10))
def test_offset_and_density_are_ignored(b0, b1, alpha):
    base = classify(SeedData(1.0, 0.5, -1.0), P3)
    assert classify(SeedData(1.0, 0.5, -1.0, b0, b1, alpha), P3) == base


@given(a0=st.floats(0.01, 100), a1=st.floats(-100, -0.01),
       lam=st.sampled_from([0.5, 2.0, 4.0, 0.25, 8.0]))
def test_linear_blowup_time_scale_invariant(a0, a1, lam):
    p = ModelParams(1.0, 2.0)
    assert classify(SeedData(a0, a1, 0.0), p).T_formula == \
        classify(SeedData(lam * a0, lam * a1, 0.0), p).T_formula


@given(xi=st.floats(-5, -0.01), a0=st.floats(0.1, 10), gamma=st.floats(1.1, 4))
def test_sign_of_energy_matches_lemma_for_nonnegative_speed(xi, a0, gamma):
    v = escape_speed(xi, a0, gamma)
    for a1 in (0.0, 0.5 * v, 0.999 * v, 1.001 * v, 2 * v):
        c = classify(SeedData(a0, a1, xi), ModelParams(1.0, gamma))
        assert c.blowup == (c.energy < 0)


def test_kappa_independent_of_gamma():
    seed = SeedData(1.0, 1.2, -1.0)  # escape speed is sqrt(2) at kappa = 2 and 1 at kappa = 3
    assert not classify(seed, ModelParams(1.0, 2.0), kappa=3.0).blowup
    assert classify(seed, ModelParams(1.0, 2.0)).blowup


def test_quadrature_examples():
    assert blowup_time_quadrature(SeedData(1.0, -2.0, 0.0), ModelParams(1.0, 2.0)) == \
        pytest.approx(0.5, abs=1e-14)
    assert blowup_time_quadrature(SeedData(1.0, 0.0, -1.0), P3) == pytest.approx(1.0, abs=1e-12)
    seed = SeedData(1.0, 0.5, -1.0)
    T_q = blowup_time_quadrature(seed, P3)
    assert abs(integrate(seed, P3, 10.0).blowup_time - T_q) <= 1e-6


@pytest.mark.parametrize("a1", [0.0, 0.5, 0.9])
def test_quadrature_gamma3_closed_form(a1):
    # gamma = 3, xi = -1, a0 = 1: a^2 obeys (a^2)'' = 4E, so a^2 = 1 + 2 a1 t + 2E t^2 with E < 0
    E = 0.5 * a1 * a1 - 0.5
    T = (-2 * a1 - math.sqrt(4 * a1 * a1 - 8 * E)) / (4 * E)
    assert blowup_time_quadrature(SeedData(1.0, a1, -1.0), P3) == pytest.approx(T, rel=1e-12)


def test_with_numeric_fills_T():
    c = classify(SeedData(1.0, 0.0, -1.0), P3, with_numeric=True)
    assert c.T_formula is None and c.T == pytest.approx(1.0, abs=1e-12)
    c = classify(SeedData(1.0, -2.0, 0.0), P3, with_numeric=True)
    assert abs(c.T_formula - c.T_numeric) <= 1e-6 * max(c.T_formula, 1)


def test_quadrature_rejects_global():
    with pytest.raises(NotABlowupSeed):
        blowup_time_quadrature(SeedData(1.0, 2.0, -1.0), P3)


def test_velocity_gradient_linear_collapse():
    traj = integrate(SeedData(1.0, -2.0, 0.0), ModelParams(1.0, 2.0), 10.0)
    hits = velocity_gradient_blowup_check(traj)
    for M, t_M in hits.items():
        assert abs(t_M - (1 - 2 / M) / 2) <= 1e-6
    assert abs(hits[10.0] - 0.4) <= 1e-6


def test_velocity_gradient_unreached_bound():
    traj = integrate(SeedData(1.0, -2.0, 0.0), ModelParams(1.0, 2.0), 10.0)
    assert velocity_gradient_blowup_check(traj, bounds=(1e300,)) == {1e300: None}


def test_velocity_gradient_rejects_completed():
    traj = integrate(SeedData(1.0, 1.0, 1.0), ModelParams(1.0, 2.0), 1.0)
    with pytest.raises(NotABlowupTrajectory):
        velocity_gradient_blowup_check(traj)
