"""Spin-boson models: truncation, path sampler, FK identity, bounds."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import lowspec.spinboson as sb
from lowspec.laplace import LaplaceEvaluator
from lowspec.wiener import atom_average_estimate


def three_level():
    A = np.array([[0.9, -0.4, -0.2],
                  [-0.4, 0.7, -0.3],
                  [-0.2, -0.3, 1.1]])
    B = np.diag([0.6, -0.1, 0.4])
    return sb.GSBModel(sb.SpinSystem(A, B), sb.BosonField([1.0, 1.7],
                                                          [0.15, 0.1], 6))


def test_spin_system_validation():
    with pytest.raises(sb.SpinBosonError):
        sb.SpinSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))
    with pytest.raises(sb.SpinBosonError):
        sb.BosonField([1.0], [0.1, 0.2], 4)
    with pytest.raises(sb.SpinBosonError):
        sb.BosonField([-1.0], [0.1], 4)


def test_stoquastic_check():
    assert sb.check_stoquastic(np.array([[1.0, -0.3], [-0.3, 0.5]]))
    assert not sb.check_stoquastic(np.array([[1.0, 0.3], [0.3, 0.5]]))


def test_generator_rows_sum_to_zero():
    model = three_level()
    Q, v, w = sb.build_generator(model.spin)
    np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)
    assert np.all(Q - np.diag(np.diag(Q)) >= 0.0)


def test_ssb_flag():
    assert sb.ssb_model(1.0, 0.2, 1.0, 4).is_ssb
    assert not three_level().is_ssb


def test_decoupled_model_ground_state():
    model = sb.ssb_model(1.0, 0.0, 1.0, 4)
    g = sb.exact_ground(model)
    assert g.E == pytest.approx(-1.0)
    assert g.rho == pytest.approx(1.0)
    assert g.phi_N == pytest.approx(0.0, abs=1e-12)


def test_truncation_gate_triggers():
    with pytest.raises(sb.SpinBosonError):
        sb.exact_ground(sb.ssb_model(1.0, 1.5, 1.0, 1))


def test_kernel_closed_form():
    model = three_level()
    ts = np.array([0.0, 0.5, 2.0])
    expect = (0.15 ** 2 * np.exp(-1.0 * ts) + 0.1 ** 2 * np.exp(-1.7 * ts))
    np.testing.assert_allclose(model.g(ts), expect, rtol=1e-12)


def test_infrared_integral_closed_vs_quadrature():
    model = three_level()
    for a in (0.5, 0.75, 1.0):
        closed = sb.infrared_integral(model, a)
        numeric, err = quad(lambda s: s ** (2 * a - 1) * model.g(np.array([s]))[0],
                            0.0, np.inf, limit=400)
        assert closed == pytest.approx(numeric, abs=max(1e-10, 10 * err))


def test_spectral_measure_reproduces_transform():
    model = sb.ssb_model(1.0, 0.2, 1.0, 8)
    meas = sb.spectral_measure(model)
    ev = LaplaceEvaluator(meas)
    for T in (1.0, 5.0):
        assert ev.log_Z(T) == pytest.approx(sb.exact_log_Z(model, T),
                                            abs=1e-10)
    g = sb.exact_ground(model)
    assert atom_average_estimate(ev, 400.0) == pytest.approx(g.rho, abs=1e-3)


def test_fk_matches_diagonalization():
    model = sb.ssb_model(1.0, 0.2, 1.0, 10)
    for T in (1.0, 3.0):
        est = sb.fk_mc_Z(model, T, 40000, 17, workers=2)
        assert abs(est.logZ - sb.exact_log_Z(model, T)) <= 3.5 * est.se


def test_fk_determinism_across_workers():
    model = three_level()
    a = sb.fk_mc_Z(model, 2.0, 20000, 9, workers=1)
    b = sb.fk_mc_Z(model, 2.0, 20000, 9, workers=4)
    assert a.to_dict() == b.to_dict()


def test_free_chain_correlation_decay():
    # nu = 0 makes the FK weight trivial; the two-state chain with unit
    # jump rate has E[w(X_s) w(X_t)] = exp(-2|t-s|)
    model = sb.ssb_model(1.0, 0.0, 1.0, 2)
    tgrid = np.array([0.0, 0.5, 1.0, 2.0])
    est = sb.fk_correlations(model, 4.0, tgrid, 100000, 23, workers=2)
    w = est.corr["w_pair"]
    n = 100000
    for i in range(len(tgrid)):
        for j in range(i + 1, len(tgrid)):
            lag = tgrid[j] - tgrid[i]
            se = math.sqrt((1.0 - math.exp(-4.0 * lag)) / n) + 1e-12
            assert abs(w[i, j] - math.exp(-2.0 * lag)) <= 4.0 * se


def test_jump_parity_route_agrees():
    model = sb.ssb_model(1.0, 0.2, 1.0, 4)
    tgrid = np.array([0.0, 1.0, 2.0])
    est = sb.fk_correlations(model, 3.0, tgrid, 20000, 31, workers=2)
    np.testing.assert_allclose(est.corr["w_pair"], est.corr["jump_parity"],
                               rtol=1e-12, atol=1e-12)


def test_regularized_family_converges_from_above():
    model = sb.ssb_model(1.0, 0.2, 1.0, 12)
    rho = sb.exact_ground(model).rho
    rhos = [sb.exact_ground(sb.regularized_family(model, e)).rho
            for e in (0.4, 0.2, 0.1, 0.05)]
    assert np.all(np.diff(rhos) <= 1e-12)
    assert rhos[-1] >= rho - 1e-12
    assert rhos[-1] - rho <= 1e-3


def test_bounds_bracket_on_three_level():
    model = three_level()
    g = sb.exact_ground(model)
    target = math.log(1.0 / g.rho)
    upper = sb.bound_log_inv_rho_upper(model, 16.0, n_paths=20000, seed=11,
                                       workers=2, grid_n=48)
    lower = sb.bound_log_inv_rho_lower(model, 16.0, 20000, 13, workers=2,
                                       grid_n=48)
    assert lower <= target + 1e-4
    assert upper >= target
