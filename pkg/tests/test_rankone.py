"""Rank-one perturbations: spectral routes, Dyson identities, bracketing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lowspec.measures as me
import lowspec.rankone as ro
from lowspec.laplace import LaplaceEvaluator


def test_model_validation():
    with pytest.raises(ro.RankOneError):
        ro.RankOneModel(np.array([0.0, 1.0]), np.array([0.7, 0.7]))
    with pytest.raises(ro.RankOneError):
        ro.RankOneModel(np.array([1.0, 0.0]), np.array([0.5, 0.5]))


def test_json_round_trip():
    model = ro.random_model(6, 2)
    again = ro.RankOneModel.from_json(model.to_json())
    np.testing.assert_array_equal(model.x, again.x)
    np.testing.assert_array_equal(model.w, again.w)


def test_discretize_matches_transform():
    m = me.ProbabilityMeasure(atoms=[me.AtomComponent(0.0, 0.5)],
                              densities=[me.uniform(1.0, 2.0, 0.5)])
    model = ro.discretize(m, 64)
    ev = LaplaceEvaluator(m)
    for t in (1.0, 10.0, 100.0):
        z_model = np.log(np.sum(model.w * np.exp(-t * model.x)))
        assert z_model == pytest.approx(ev.log_Z(t), rel=1e-9)


def test_unperturbed_spectral_data():
    model = ro.RankOneModel(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    res = ro.spectral(model, 0.0)
    assert res.E_alpha == pytest.approx(0.0)
    assert res.atom_mass_alpha == pytest.approx(0.5)


def test_negative_alpha_pulls_eigenvalue_down():
    model = ro.random_model(8, 3)
    e_prev = ro.spectral(model, 0.0).E_alpha
    for alpha in (-0.5, -1.0, -2.0):
        e = ro.spectral(model, alpha).E_alpha
        assert e < e_prev
        e_prev = e


def test_one_point_model_exact():
    # H_alpha = x + alpha is scalar; everything is explicit
    model = ro.RankOneModel(np.array([0.3]), np.array([1.0]))
    res = ro.spectral(model, -0.7)
    assert res.E_alpha == pytest.approx(-0.4)
    assert res.atom_mass_alpha == pytest.approx(1.0)
    lhs, rhs = ro.dyson_identity_check(model, 2.5, 1)
    assert lhs == pytest.approx(rhs, rel=1e-7)


def test_dyson_identities_small_models():
    two = ro.RankOneModel(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    eight = ro.random_model(8, 11)
    for model in (two, eight):
        for order in (1, 2):
            lhs, rhs = ro.dyson_identity_check(model, 5.0, order)
            assert lhs == pytest.approx(rhs, rel=1e-6)


def test_energy_concave_in_alpha():
    model = ro.random_model(8, 7)
    out = ro.concavity_check(model, 5.0, np.linspace(-2.0, 2.0, 41))
    assert out["concave"]
    assert out["max_violation"] <= 1e-9


def test_feynman_hellmann_bracket():
    model = ro.random_model(8, 3)
    for alpha in (-2.0, -1.0, -0.25, 0.0):
        rep = ro.feynman_hellmann_check(model, alpha)
        assert rep["holds"]
        assert rep["d_plus"] <= rep["atom_mass"] + 1e-5
        assert rep["atom_mass"] <= rep["d_minus"] + 1e-5


def test_atom_mass_profile_nonincreasing():
    model = ro.random_model(8, 3)
    prof = ro.atom_mass_profile(model, np.linspace(-2.0, 0.0, 21))
    assert np.all(np.diff(prof) <= 1e-12)


def test_E_alpha_t_convergence_rate():
    # -(1/t) log <psi, e^{-t H_a} psi> = E_a + log(1/mass)/t + O(e^{-t gap})
    model = ro.RankOneModel(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    res = ro.spectral(model, -1.0)
    for t in (50.0, 100.0):
        expect = res.E_alpha + np.log(1.0 / res.atom_mass_alpha) / t
        assert ro.E_alpha_t(model, -1.0, t) == pytest.approx(expect,
                                                             abs=1e-10)


@given(seed=st.integers(0, 10_000), alpha=st.floats(-3.0, -0.01))
@settings(max_examples=30, deadline=None)
def test_atom_mass_in_unit_interval(seed, alpha):
    model = ro.random_model(5, seed)
    res = ro.spectral(model, alpha)
    assert 0.0 < res.atom_mass_alpha <= 1.0 + 1e-12
    assert res.E_alpha <= model.x[0] + 1e-12
