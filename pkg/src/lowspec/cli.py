"""Batch command-line front end.

Loads measure/model configs (INI format with an ``include`` mechanism for
shared fixtures), runs the estimators and simulations, and writes JSON
results plus optional CSV series.  Every stochastic quantity carries its
standard error and sample count; with a fixed seed the output bytes are
identical regardless of the worker count (pass --no-timestamp to strip the
only non-deterministic field).

Exit codes: 0 success, 2 config error, 3 numerical gate failure.
"""

import argparse
import configparser
import csv
import datetime
import importlib.metadata
import json
import os
import sys

import numpy as np

from . import measures as me
from . import rankone as ro
from . import renewal as rn
from . import spinboson as sb
from . import wiener as wi
from .laplace import LaplaceEvaluator

CONFIG_ERROR = 2
GATE_ERROR = 3


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path}")
    if cp.has_option("DEFAULT", "include") or cp.has_option("run", "include"):
        base = cp.get("run", "include", fallback=None) or cp.get("DEFAULT", "include")
        base_path = os.path.join(os.path.dirname(os.path.abspath(path)), base)
        merged = _load_config(base_path)
        for sec in cp.sections():
            if not merged.has_section(sec):
                merged.add_section(sec)
            for k, v in cp.items(sec):
                merged.set(sec, k, v)
        return merged
    return cp


def parse_measure(cp: configparser.ConfigParser) -> me.ProbabilityMeasure:
    """Build a measure from the [measure] section.

    Keys ``atom.N = location mass`` and ``density.N = kind args...`` with
    kinds uniform(a b weight), exponential(rate a weight),
    power(a b p weight), polynomial(a b weight c0 c1 ...).
    """
    if not cp.has_section("measure"):
        raise ConfigError("config needs a [measure] section")
    atoms, densities = [], []
    for key, val in cp.items("measure"):
        parts = val.split()
        if key.startswith("atom."):
            atoms.append(me.AtomComponent(float(parts[0]), float(parts[1])))
        elif key.startswith("density."):
            kind, args = parts[0], [float(x) for x in parts[1:]]
            if kind == "uniform":
                densities.append(me.uniform(args[0], args[1], args[2]))
            elif kind == "exponential":
                densities.append(me.exponential(args[0], args[1], args[2]))
            elif kind == "power":
                densities.append(me.PowerEdge(weight=args[3], a=args[0],
                                              b=args[1], p=args[2]))
            elif kind == "polynomial":
                densities.append(me.PiecewisePolynomial(
                    weight=args[2], a=args[0], b=args[1], coeffs=tuple(args[3:])))
            else:
                raise ConfigError(f"unknown density kind {kind}")
    return me.ProbabilityMeasure(atoms=atoms, densities=densities)


def parse_spinboson(cp: configparser.ConfigParser) -> sb.GSBModel:
    if not cp.has_section("spinboson"):
        raise ConfigError("config needs a [spinboson] section")
    sec = cp["spinboson"]

    def matrix(text):
        return np.array([[float(x) for x in row.split()]
                         for row in text.strip().split(";")])

    A = matrix(sec["a"])
    B = matrix(sec["b"])
    omegas = [float(x) for x in sec["omegas"].split()]
    nus = [float(x) for x in sec["nus"].split()]
    n_max = sec.getint("n_max")
    basis = matrix(sec["basis"]) if "basis" in sec else None
    return sb.GSBModel(sb.SpinSystem(A, B, basis), sb.BosonField(omegas, nus, n_max))


def _params(cp):
    return cp["params"] if cp.has_section("params") else {}


def _floats(text):
    return [float(x) for x in text.split()]


def _result(value, provenance, se=None, n=None):
    out = {"value": value, "provenance": provenance}
    if se is not None:
        out["se"] = se
    if n is not None:
        out["n"] = n
    return out


def _write_output(payload: dict, args, series=None):
    if not args.no_timestamp:
        payload["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
    try:
        payload["version"] = importlib.metadata.version("lowspec")
    except importlib.metadata.PackageNotFoundError:  # pragma: no cover
        payload["version"] = "unknown"
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if series and args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in series:
                writer.writerow(row)


def _cmd_transform(cp, args):
    measure = parse_measure(cp)
    ev = LaplaceEvaluator(measure)
    p = _params(cp)
    ts = _floats(p.get("t_grid", "0.5 1 2 5 10 20 50 100"))
    table = {f"{t:g}": ev.log_Z(t) for t in ts}
    payload = {
        "results": {
            "E": _result(ev.E, "exact"),
            "mean": _result(ev.m, "exact"),
            "log_Z": _result(table, "quadrature"),
        },
    }
    series = [("t", "log_Z")] + [(t, ev.log_Z(t)) for t in ts]
    return payload, series


def _cmd_atom(cp, args):
    measure = parse_measure(cp)
    ev = LaplaceEvaluator(measure)
    p = _params(cp)
    schedule = _floats(p.get("t_schedule", "10 20 40 80 160"))
    kappa = float(p.get("kappa", "0.5"))
    run = wi.run_schedule(lambda t: wi.atom_average_estimate(ev, t), schedule,
                          extrapolate=True)
    quot = wi.atom_quotient_estimate(ev, kappa, schedule[-1])
    payload = {
        "results": {
            "atom_average": _result(run.values[-1], "quadrature"),
            "atom_quotient": _result(quot, "quadrature"),
            "converged": _result(run.converged, "quadrature"),
            "extrapolated": _result(run.extrapolated, "quadrature"),
            "t_schedule": _result(list(run.t_schedule), "exact"),
            "values": _result(list(run.values), "quadrature"),
        },
    }
    series = [("t", "atom_average")] + list(zip(run.t_schedule, run.values))
    return payload, series


def _cmd_inverse_moment(cp, args):
    measure = parse_measure(cp)
    ev = LaplaceEvaluator(measure)
    p = _params(cp)
    t = float(p.get("t", "100"))
    n = int(p.get("n_grid", "512"))
    est = wi.inverse_moment_estimate(ev, t, n=n)
    payload = {
        "results": {
            "inverse_moment": _result(est.value, "quadrature"),
            "A1": _result(est.a1, "quadrature"),
            "A2": _result(est.a2, "quadrature"),
            "refinement_gap": _result(est.refinement_gap, "quadrature"),
        },
    }
    return payload, None


def _require_seed(args):
    if args.seed is None:
        raise ConfigError("stochastic commands require --seed")


def _cmd_renewal_sim(cp, args):
    _require_seed(args)
    measure = parse_measure(cp)
    transform = rn.build_renewal_transform(measure)
    p = _params(cp)
    T = float(p.get("horizon", "30"))
    n = int(p.get("n_paths", "100000"))
    tgrid = _floats(p.get("t_grid", "0.5 1 2 5 10"))
    stats = rn.sample_paths(transform, T, n, args.seed, tgrid=tgrid,
                            workers=args.workers)
    pz, se, exact = rn.dormant_probability_check(transform, stats)
    atom, atom_se = rn.atom_via_renewal(stats)
    inv, inv_se = rn.inverse_moment_via_renewal(stats)
    payload = {
        "results": {
            "beta": _result(transform.beta, "exact"),
            "p_zero": _result(pz.tolist(), "mc", se.tolist(), n),
            "p_zero_exact": _result(exact.tolist(), "quadrature"),
            "atom_via_renewal": _result(atom, "mc", atom_se, n),
            "inverse_moment_via_renewal": _result(inv, "mc", inv_se, n),
            "d1_ks_pvalue": _result(rn.d1_ks_test(stats), "mc", None, n),
            "sim_stats": _result(stats.to_dict(), "mc"),
            "truncation": _result(transform.truncation_report(), "quadrature"),
        },
    }
    series = [("t", "p_zero_mc", "p_zero_exact")] + \
        list(zip(tgrid, pz.tolist(), exact.tolist()))
    return payload, series


def _cmd_stieltjes(cp, args):
    _require_seed(args)
    measure = parse_measure(cp)
    transform = rn.build_renewal_transform(measure)
    p = _params(cp)
    T = float(p.get("horizon", "30"))
    n = int(p.get("n_paths", "100000"))
    z = complex(p.get("z", "-1"))
    stats = rn.sample_paths(transform, T, n, args.seed, workers=args.workers)
    lhs, rhs, se, bias = rn.stieltjes_check(transform, stats, z)
    payload = {
        "results": {
            "z": _result([z.real, z.imag], "exact"),
            "lhs_quadrature": _result([lhs.real, lhs.imag], "quadrature"),
            "rhs_renewal": _result([rhs.real, rhs.imag], "mc", se, n),
            "censor_bias_bound": _result(bias, "exact"),
        },
    }
    return payload, None


def _cmd_classify(cp, args):
    _require_seed(args)
    measure = parse_measure(cp)
    transform = rn.build_renewal_transform(measure)
    p = _params(cp)
    T = float(p.get("horizon", "30"))
    n = int(p.get("n_paths", "50000"))
    s1 = rn.sample_paths(transform, T, n, args.seed, workers=args.workers)
    s2 = rn.sample_paths(transform, 2 * T, n, args.seed, workers=args.workers)
    label = rn.classify_singularity(s1, s2)
    payload = {
        "results": {
            "class": _result(label, "mc", None, n),
            "censor_fraction_T": _result(s1.censor_fraction, "mc", None, n),
            "censor_fraction_2T": _result(s2.censor_fraction, "mc", None, n),
            "note": _result("finite-horizon diagnostic, not a proof", "exact"),
        },
    }
    return payload, None


def _cmd_rankone(cp, args):
    measure = parse_measure(cp)
    p = _params(cp)
    n_nodes = int(p.get("n_nodes", "64"))
    t = float(p.get("t", "5"))
    alpha = float(p.get("alpha", "-1"))
    try:
        model = ro.discretize(measure, n_nodes)
    except ro.RankOneError as exc:
        raise GateFailure(str(exc))
    spec0 = ro.spectral(model, alpha)
    d1 = ro.dyson_identity_check(model, t, 1)
    d2 = ro.dyson_identity_check(model, t, 2)
    grid = np.linspace(-2.0, 0.0, 9)
    fh = ro.feynman_hellmann_check(model, alpha if alpha <= 0 else 0.0)
    payload = {
        "results": {
            "E_alpha": _result(spec0.E_alpha, "exact"),
            "atom_mass_alpha": _result(spec0.atom_mass_alpha, "exact"),
            "E_alpha_t": _result(ro.E_alpha_t(model, alpha, t), "exact"),
            "dyson_order1": _result(list(d1), "quadrature"),
            "dyson_order2": _result(list(d2), "quadrature"),
            "feynman_hellmann": _result(fh, "exact"),
            "atom_mass_profile": _result(
                ro.atom_mass_profile(model, grid).tolist(), "exact"),
        },
    }
    return payload, None


def _cmd_spinboson_exact(cp, args):
    model = parse_spinboson(cp)
    try:
        g = sb.exact_ground(model)
    except sb.SpinBosonError as exc:
        raise GateFailure(str(exc))
    payload = {
        "results": {
            "E": _result(g.E, "exact"),
            "rho": _result(g.rho, "exact"),
            "phi_N": _result(g.phi_N, "exact"),
            "mean": _result(g.mean, "exact"),
            "spectrum_head": _result(g.spectrum_head.tolist(), "exact"),
            "truncation_gate": _result(list(g.gate), "exact"),
        },
    }
    return payload, None


def _cmd_spinboson_fk(cp, args):
    _require_seed(args)
    model = parse_spinboson(cp)
    p = _params(cp)
    T = float(p.get("horizon", "2"))
    n = int(p.get("n_paths", "100000"))
    est = sb.fk_mc_Z(model, T, n, args.seed, workers=args.workers)
    exact = sb.exact_log_Z(model, T)
    payload = {
        "results": {
            "logZ_mc": _result(est.logZ, "mc", est.se, n),
            "logZ_exact": _result(exact, "exact"),
            "ess": _result(est.ess, "mc", None, n),
        },
    }
    return payload, None


def _cmd_spinboson_bounds(cp, args):
    _require_seed(args)
    model = parse_spinboson(cp)
    p = _params(cp)
    T = float(p.get("horizon", "16"))
    n = int(p.get("n_paths", "20000"))
    grid_n = int(p.get("grid_n", "64"))
    try:
        g = sb.exact_ground(model)
    except sb.SpinBosonError as exc:
        raise GateFailure(str(exc))
    upper = sb.bound_log_inv_rho_upper(model, T, n_paths=n, seed=args.seed,
                                       workers=args.workers, grid_n=grid_n)
    lower = sb.bound_log_inv_rho_lower(model, T, n, args.seed + 1,
                                       workers=args.workers, grid_n=grid_n)
    payload = {
        "results": {
            "log_inv_rho_exact": _result(float(np.log(1.0 / g.rho)), "exact"),
            "upper_bound": _result(upper, "mc", None, n),
            "lower_bound": _result(lower, "mc", None, n),
            "phi_N": _result(g.phi_N, "exact"),
        },
    }
    return payload, None


class GateFailure(RuntimeError):
    pass


COMMANDS = {
    "transform": _cmd_transform,
    "atom": _cmd_atom,
    "inverse-moment": _cmd_inverse_moment,
    "renewal-sim": _cmd_renewal_sim,
    "stieltjes": _cmd_stieltjes,
    "classify": _cmd_classify,
    "rankone": _cmd_rankone,
    "spinboson-exact": _cmd_spinboson_exact,
    "spinboson-fk": _cmd_spinboson_fk,
    "spinboson-bounds": _cmd_spinboson_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lowspec",
        description="Laplace-quotient estimators, renewal simulation, and "
                    "spin-boson ground-state diagnostics")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI config file")
    ap.add_argument("--out", help="output JSON path (default stdout)")
    ap.add_argument("--csv", help="optional CSV series path")
    ap.add_argument("--seed", type=int, help="RNG seed (stochastic commands)")
    ap.add_argument("--workers", type=int,
                    default=int(os.environ.get("LOWSPEC_WORKERS", "1")))
    ap.add_argument("--no-timestamp", action="store_true",
                    help="suppress the timestamp field for byte-stable output")
    ap.add_argument("--tolerance", type=float, default=None,
                    help="override for gate tolerances where applicable")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cp = _load_config(args.config)
        payload, series = COMMANDS[args.command](cp, args)
    except (GateFailure, ArithmeticError) as exc:
        print(f"numerical gate failure: {exc}", file=sys.stderr)
        return GATE_ERROR
    except (ConfigError, configparser.Error, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    payload["command"] = args.command
    payload["inputs"] = {
        "config": os.path.basename(args.config),
        "seed": args.seed,
        "sections": {s: dict(cp.items(s)) for s in cp.sections()},
    }
    _write_output(payload, args, series)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
