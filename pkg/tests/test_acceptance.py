"""Acceptance suite: one test per criterion, -v gives one line each.

Tolerances and runtimes are asserted as stated in the criteria.  Two
assertions are expected to fail for reasons documented in the project
notes (see /root/notes/decisions.md):

* criterion 2: the averaged estimator carries an exact finite-time bias
  of 2 rho (1 - rho) / (t gap Z_t), which lies in [2e-3, 8e-3] at
  t = 200/gap for the required fixtures, above the 1e-3 tolerance.
* criterion 4: for the two-atom fixture the estimator's continuum value
  at t = 100 is rho (t - 2)/(t + 2) = 0.48039, which is 3.9% from the
  oracle 0.5, above the 3% tolerance.

The assertions are kept at the stated tolerances rather than widened.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

import lowspec as L
import lowspec.measures as me
from lowspec import cli
from lowspec.laplace import LaplaceEvaluator

RHOS = (0.2, 0.5, 0.8)
GAPS = (0.5, 1.0)

EXP_MEASURE = me.ProbabilityMeasure(
    atoms=[], densities=[me.exponential(1.0, 0.0, 1.0)])
POWER_MEASURE = me.ProbabilityMeasure(
    atoms=[], densities=[me.PowerEdge(weight=1.0, a=0.0, b=1.0, p=0.5)])
MIX_MEASURE = me.ProbabilityMeasure(
    atoms=[me.AtomComponent(0.0, 0.5)], densities=[me.uniform(1.0, 2.0, 0.5)])


def three_level_model():
    A = np.array([[0.9, -0.4, -0.2],
                  [-0.4, 0.7, -0.3],
                  [-0.2, -0.3, 1.1]])
    B = np.diag([0.6, -0.1, 0.4])
    return L.GSBModel(L.SpinSystem(A, B), L.BosonField([1.0, 1.7],
                                                       [0.15, 0.1], 6))


def massive_fixtures():
    return [("ssb_half", L.ssb_model(1.0, 0.2, 0.5, 12)),
            ("ssb_one", L.ssb_model(1.0, 0.2, 1.0, 12)),
            ("three_level", three_level_model())]


def test_criterion_01_quotient_form():
    start = time.time()
    for rho in RHOS:
        for gap in GAPS:
            ev = LaplaceEvaluator(me.two_atoms(rho, gap))
            for kappa in (0.25, 0.5, 0.75):
                est = L.atom_quotient_estimate(ev, kappa, 80.0 / gap)
                assert abs(est - rho) <= 1e-4, (rho, gap, kappa, est)
    assert time.time() - start < 1.0


def test_criterion_02_averaged_form():
    start = time.time()
    worst = 0.0
    for rho in RHOS:
        for gap in GAPS:
            ev = LaplaceEvaluator(me.two_atoms(rho, gap))
            ts = np.array([10, 25, 50, 100, 150, 200]) / gap
            series = [L.atom_average_estimate(ev, t) for t in ts]
            assert max(np.diff(series)) <= 1e-10, "monotonicity violated"
            worst = max(worst, abs(series[-1] - rho))
    assert time.time() - start < 10.0
    # known to fail: exact finite-t bias 2 rho (1-rho)/(t gap Z_t) > 1e-3
    assert worst <= 1e-3, f"bias at t=200/gap is {worst:.2e} (see notes)"


def test_criterion_03_zero_atom_decay():
    start = time.time()
    for meas in (EXP_MEASURE, POWER_MEASURE):
        ev = LaplaceEvaluator(meas)
        assert (L.atom_quotient_estimate(ev, 0.5, 1e2)
                >= 10.0 * L.atom_quotient_estimate(ev, 0.5, 1e4))
        assert (L.atom_average_estimate(ev, 1e2)
                >= 10.0 * L.atom_average_estimate(ev, 1e4))
    assert time.time() - start < 10.0


def test_criterion_04_inverse_moment():
    start = time.time()
    results = {}
    for name, meas, oracle in (
            ("mixture", MIX_MEASURE, 0.5 * math.log(2.0)),
            ("two_atom", me.two_atoms(0.5, 1.0), 0.5)):
        est = L.inverse_moment_estimate(LaplaceEvaluator(meas), 100.0, n=512)
        fine = L.inverse_moment_estimate(LaplaceEvaluator(meas), 100.0, n=1024)
        assert abs(est.value - fine.value) <= 1e-3, name
        results[name] = abs(est.value - oracle) / oracle
    assert time.time() - start < 60.0
    assert results["mixture"] <= 0.03
    # known to fail: continuum value rho (t-2)/(t+2) is 3.9% from 0.5
    assert results["two_atom"] <= 0.03, \
        f"two-atom relative error {results['two_atom']:.3f} (see notes)"


def test_criterion_05_renewal_identity():
    start = time.time()
    tgrid = [0.5, 1.0, 2.0, 5.0, 10.0]
    for meas in (me.two_atoms(0.5, 1.0), EXP_MEASURE):
        tr = L.build_renewal_transform(meas)
        stats = L.sample_paths(tr, 30.0, 100000, 424242, tgrid=tgrid,
                               workers=4)
        mc, se, exact = L.dormant_probability_check(tr, stats)
        assert np.all(np.abs(mc - exact) <= 3.0 * se)
        assert L.d1_ks_test(stats) > 0.01
    assert time.time() - start < 60.0


def test_criterion_06_renewal_formulas():
    start = time.time()
    for meas, rho, inv_oracle in (
            (me.two_atoms(0.5, 1.0), 0.5, 0.5),
            (MIX_MEASURE, 0.5, 0.5 * math.log(2.0))):
        tr = L.build_renewal_transform(meas)
        stats = L.sample_paths(tr, 30.0, 100000, 424242, workers=4)
        atom, ase = L.atom_via_renewal(stats)
        assert abs(atom - rho) <= 3.0 * ase
        inv, ise = L.inverse_moment_via_renewal(stats)
        assert abs(inv - inv_oracle) <= 3.0 * ise
    assert time.time() - start < 60.0


def test_criterion_07_stieltjes_identity():
    start = time.time()
    tr = L.build_renewal_transform(me.two_atoms(0.5, 1.0))
    stats = L.sample_paths(tr, 30.0, 100000, 424242, workers=4)
    for z in (-0.5, -1.0, -2.0, complex(-1.0, 0.5)):
        lhs, rhs, se, bias = L.stieltjes_check(tr, stats, z)
        assert abs(lhs - rhs) <= 3.0 * se + bias, z
    assert time.time() - start < 30.0


def test_criterion_08_rank_one_suite():
    start = time.time()
    one = L.RankOneModel(np.array([0.25]), np.array([1.0]))
    two = L.RankOneModel(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    eight = L.random_model(8, 3)
    for model in (one, two, eight):
        for order in (1, 2):
            lhs, rhs = L.dyson_identity_check(model, 5.0, order)
            assert lhs == pytest.approx(rhs, rel=1e-6), order
    cc = L.concavity_check(eight, 5.0, np.linspace(-2.0, 2.0, 41))
    assert cc["concave"]
    for alpha in np.linspace(-2.0, 0.0, 9):
        assert L.feynman_hellmann_check(eight, float(alpha),
                                        h=1e-4)["holds"], alpha
    prof = L.atom_mass_profile(eight, np.linspace(-2.0, 0.0, 21))
    assert np.all(np.diff(prof) <= 1e-12)
    assert time.time() - start < 30.0


def test_criterion_09_spin_boson_fk():
    start = time.time()
    models = [L.ssb_model(1.0, 0.2, a, 12) for a in (0.5, 1.0)]
    models.append(three_level_model())
    for model in models:
        for T in (1.0, 2.0, 4.0):
            est = L.fk_mc_Z(model, T, 100000, 42, workers=4)
            exact = L.exact_log_Z(model, T)
            assert abs(est.logZ - exact) <= 3.0 * est.se, (T, est.logZ, exact)
    assert time.time() - start < 300.0


def test_criterion_10_spin_boson_bounds():
    start = time.time()
    # 3 sigma of the observed seed-to-seed spread at these path counts
    mc_tol = 4.5e-5
    failures = []
    for name, model in massive_fixtures():
        g = L.exact_ground(model)
        target = math.log(1.0 / g.rho)
        upper = L.bound_log_inv_rho_upper(model, 16.0, n_paths=60000,
                                          seed=11, workers=4, grid_n=64)
        lower = L.bound_log_inv_rho_lower(model, 16.0, 60000, 13,
                                          workers=4, grid_n=64)
        ref = g.phi_N + (0.0 if model.is_ssb
                         else math.log(model.spin.A.shape[0]))
        if not lower <= target + mc_tol:
            failures.append(f"{name}: lower {lower:.3e} > {target:.3e}")
        if not upper >= target - mc_tol:
            failures.append(f"{name}: upper {upper:.3e} < {target:.3e}")
        if not abs(upper - ref) <= 0.1 * abs(ref):
            failures.append(f"{name}: upper {upper:.3e} not within 10% "
                            f"of {ref:.3e}")
    assert time.time() - start < 300.0
    # known to fail: the upper bound is a liminf statement; its finite-T
    # value sits O(1/T) below the limit, which exceeds the margin
    # limit - log(1/rho) for both SSB fixtures (see notes)
    assert not failures, "; ".join(failures)


def test_criterion_11_spectral_measure_tie():
    start = time.time()
    model = L.ssb_model(1.0, 0.2, 0.5, 12)
    g = L.exact_ground(model)
    ev = LaplaceEvaluator(L.spectral_measure(model))
    est = L.atom_average_estimate(ev, 200.0)
    assert abs(est - g.rho) <= 1e-3
    assert time.time() - start < 30.0


def test_criterion_12_infrared_integral():
    start = time.time()
    model = three_level_model()
    for a in (0.5, 0.75, 1.0):
        closed = L.infrared_integral(model, a)
        numeric, err = quad(
            lambda s: s ** (2 * a - 1) * model.g(np.array([s]))[0],
            0.0, np.inf, limit=400)
        assert abs(closed - numeric) <= max(1e-8, 10 * err), a
    assert time.time() - start < 1.0


def test_criterion_13_determinism(tmp_path):
    cfg = tmp_path / "two.ini"
    cfg.write_text("[measure]\natom.1 = 0.0 0.5\natom.2 = 1.0 0.5\n"
                   "\n[params]\nhorizon = 15\nn_paths = 20000\n")
    ssb = tmp_path / "ssb.ini"
    ssb.write_text("[spinboson]\na = -0 -1; -1 -0\nb = 1 0; 0 -1\n"
                   "omegas = 1.0\nnus = 0.2\nn_max = 6\n"
                   "\n[params]\nhorizon = 2\nn_paths = 20000\n")
    for command, conf in (("renewal-sim", cfg), ("spinboson-fk", ssb)):
        outputs = []
        for workers in ("1", "2", "5"):
            out = tmp_path / f"{command}-{workers}.json"
            code = cli.main([command, "--config", str(conf), "--seed", "21",
                             "--workers", workers, "--no-timestamp",
                             "--out", str(out)])
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2], command
