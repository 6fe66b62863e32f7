"""Laplace evaluator: closed forms, tilted moments, and quotient bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lowspec.measures as me
from lowspec.laplace import LaplaceEvaluator


def test_two_atom_closed_form():
    ev = LaplaceEvaluator(me.two_atoms(0.3, 2.0))
    for t in (0.1, 1.0, 10.0, 200.0):
        assert ev.log_Z(t) == pytest.approx(
            math.log(0.3 + 0.7 * math.exp(-2.0 * t)), abs=1e-12)


def test_exponential_closed_form():
    m = me.ProbabilityMeasure(atoms=[],
                              densities=[me.exponential(1.0, 0.0, 1.0)])
    ev = LaplaceEvaluator(m)
    for t in (0.5, 5.0, 500.0):
        assert ev.log_Z(t) == pytest.approx(-math.log1p(t), abs=1e-12)


def test_log_Z_many_matches_scalar():
    ev = LaplaceEvaluator(me.two_atoms(0.5, 1.0))
    ts = np.array([0.1, 1.0, 30.0])
    np.testing.assert_allclose(ev.log_Z_many(ts),
                               [ev.log_Z(t) for t in ts], rtol=1e-14)


def test_tilted_variance_integrates_to_mean_gap():
    # int_0^infty Var[mu_hat_t] dt = m - E
    m = me.ProbabilityMeasure(atoms=[me.AtomComponent(0.0, 0.5)],
                              densities=[me.uniform(1.0, 2.0, 0.5)])
    ev = LaplaceEvaluator(m)
    from scipy.integrate import quad
    val, err = quad(lambda t: ev.tilted_stats(t).var, 0.0, np.inf, limit=400)
    assert val == pytest.approx(ev.m - ev.E, abs=max(1e-8, 10 * err))


def test_infsupp_estimate_converges():
    # -log Z_t / t = E + log(1/rho)/t, so the error at time t is log(2)/t
    ev = LaplaceEvaluator(me.two_atoms(0.5, 1.0, base=0.7))
    for t in (100.0, 400.0):
        assert ev.infsupp_estimate(t) == pytest.approx(
            0.7 + math.log(2.0) / t, abs=1e-9)


def test_log_quotient_consistency():
    ev = LaplaceEvaluator(me.two_atoms(0.2, 0.5))
    s, t = 3.0, 10.0
    expect = ev.log_Z(s) + ev.log_Z(t - s) - ev.log_Z(t)
    assert ev.log_quotient(s, t) == pytest.approx(expect, abs=1e-12)


@given(rho=st.floats(0.05, 0.95), gap=st.floats(0.1, 4.0),
       t=st.floats(0.01, 50.0))
@settings(max_examples=60, deadline=None)
def test_log_Z_convex_decreasing(rho, gap, t):
    ev = LaplaceEvaluator(me.two_atoms(rho, gap))
    h = 1e-3
    f0, f1, f2 = ev.log_Z(t), ev.log_Z(t + h), ev.log_Z(t + 2 * h)
    assert f1 <= f0 + 1e-12
    assert f0 - 2 * f1 + f2 >= -1e-9


@given(rho=st.floats(0.05, 0.95), t=st.floats(0.1, 40.0),
       frac=st.floats(0.1, 0.9))
@settings(max_examples=60, deadline=None)
def test_quotient_between_atom_mass_and_one(rho, t, frac):
    # log-convexity of Z puts Z_s Z_{t-s} / Z_t in [rho, 1]
    ev = LaplaceEvaluator(me.two_atoms(rho, 1.0))
    lq = ev.log_quotient(frac * t, t)
    assert lq <= 1e-12
    assert math.exp(lq) >= rho - 1e-10
