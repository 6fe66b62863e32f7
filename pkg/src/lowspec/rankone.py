"""Finite-dimensional rank-one perturbation laboratory.

A measure with lower-bounded support is represented as the spectral measure
of the multiplication operator on its (discretized) support.  The family
H_alpha = diag(x) + alpha psi psi^T, with psi the square-root weight vector,
connects the Laplace-quotient machinery to first and second order
perturbation theory: the alpha-derivatives of <psi, e^{-t H_alpha} psi> at
alpha = 0 are exactly the time-convolution integrals of Z, the map
alpha -> E_{alpha,t} is concave, and for alpha <= 0 the one-sided
derivatives of E_alpha bracket the perturbed atom mass.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.special import logsumexp

from .laplace import LaplaceEvaluator
from .measures import AtomComponent, ProbabilityMeasure, quadrature_nodes
from .wiener import _quotient_integrals


def _measure_from_model(model: "RankOneModel") -> ProbabilityMeasure:
    return ProbabilityMeasure(
        atoms=[AtomComponent(float(x), float(w)) for x, w in zip(model.x, model.w)],
        densities=[])


class RankOneError(ValueError):
    pass


@dataclass(frozen=True)
class RankOneModel:
    """Diagonal operator grid with a unit test vector of sqrt-weights."""

    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if np.any(self.w <= 0.0):
            raise RankOneError("weights must be positive")
        if abs(self.w.sum() - 1.0) > 1e-12:
            raise RankOneError("weights must sum to 1")
        if np.any(np.diff(self.x) < 0):
            raise RankOneError("grid must be sorted")

    @property
    def psi(self) -> np.ndarray:
        return np.sqrt(self.w)

    def hamiltonian(self, alpha: float) -> np.ndarray:
        psi = self.psi
        return np.diag(self.x) + alpha * np.outer(psi, psi)

    def to_json(self) -> str:
        return json.dumps({"x": self.x.tolist(), "w": self.w.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "RankOneModel":
        d = json.loads(text)
        return cls(np.asarray(d["x"], dtype=float), np.asarray(d["w"], dtype=float))


@dataclass(frozen=True)
class SpectralResult:
    E_alpha: float
    ground_vector: np.ndarray
    atom_mass_alpha: float


def discretize(measure: ProbabilityMeasure, n_nodes: int = 64,
               t_check=(1.0, 10.0, 100.0), match_rtol: float = 1e-6) -> RankOneModel:
    """Atoms verbatim plus Gauss nodes per density piece, gated on Z_t fidelity.

    The discrete model must reproduce the continuous Laplace transform within
    ``match_rtol`` at every checkpoint; estimator semantics live in Z, not in
    node counts, so this is the fidelity certificate.
    """
    xs = [np.array([a.location for a in measure.atoms])]
    ws = [np.array([a.mass for a in measure.atoms])]
    for comp in measure.densities:
        nx, nw = quadrature_nodes(comp, n_nodes)
        xs.append(nx)
        ws.append(nw)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    w = w / w.sum()
    model = RankOneModel(x, w)
    ev = LaplaceEvaluator(measure)
    for t in t_check:
        lz = logsumexp(-t * x, b=w)
        if not math.isclose(lz, ev.log_Z(t), rel_tol=0.0,
                            abs_tol=match_rtol * max(1.0, abs(ev.log_Z(t)))):
            raise RankOneError(
                f"Z_t mismatch at t={t}: quadrature too coarse for this range")
    return model


def spectral(model: RankOneModel, alpha: float,
             cluster_rtol: float = 1e-10) -> SpectralResult:
    """Lowest eigenpair of H_alpha and the psi-overlap with its eigenspace.

    Numerically degenerate ground levels (within cluster_rtol times the
    spectral diameter) are merged and the squared overlaps summed.
    """
    H = model.hamiltonian(alpha)
    vals, vecs = eigh(H)
    scale = max(vals[-1] - vals[0], 1.0)
    sel = vals <= vals[0] + cluster_rtol * scale
    ov = vecs[:, sel].T @ model.psi
    return SpectralResult(float(vals[0]), vecs[:, 0], float(np.sum(ov ** 2)))


def E_alpha_t(model: RankOneModel, alpha: float, t: float) -> float:
    """Finite-t ground energy proxy -(1/t) log <psi, e^{-t H_alpha} psi>."""
    if t <= 0:
        raise RankOneError("t must be positive")
    vals, vecs = eigh(model.hamiltonian(alpha))
    ov = vecs.T @ model.psi
    return float(-logsumexp(-t * vals, b=ov ** 2) / t)


def _log_Z_model(model, t):
    return float(logsumexp(-np.asarray(t)[..., None] * model.x, b=model.w, axis=-1))


def dyson_identity_check(model: RankOneModel, t: float, order: int,
                         n_grid: int = 1024):
    """Perturbative alpha-derivative against the time-convolution integral.

    order 1:  d/da <psi, e^{-tH_a} psi>|_0  =  -int_0^t Z_s Z_{t-s} ds
    order 2:  d2/da2 ...                    =  2 int_0^t int_0^s Z_{t-s} Z_{s-r} Z_r dr ds
    lhs by a 5-point central stencil in alpha, rhs by the triangular-grid
    quadratures shared with the inverse-moment estimator, rescaled by Z_t.
    """
    if order not in (1, 2):
        raise RankOneError("order must be 1 or 2")
    measure = _measure_from_model(model)
    ev = LaplaceEvaluator(measure)
    a1, a2 = _quotient_integrals(ev, t, n_grid)
    zt = math.exp(ev.log_Z(t))
    rhs = -a1 * zt if order == 1 else 2.0 * a2 * zt

    def f(alpha):
        vals, vecs = eigh(model.hamiltonian(alpha))
        ov = vecs.T @ model.psi
        return float(np.sum(ov ** 2 * np.exp(-t * vals)))

    h = 1e-3 / max(t, 1.0)
    pts = np.array([f(k * h) for k in (-2, -1, 0, 1, 2)])
    if order == 1:
        lhs = (pts[0] - 8 * pts[1] + 8 * pts[3] - pts[4]) / (12 * h)
    else:
        lhs = (-pts[0] + 16 * pts[1] - 30 * pts[2] + 16 * pts[3] - pts[4]) / (12 * h * h)
    return float(lhs), float(rhs)


def concavity_check(model: RankOneModel, t: float, alpha_grid) -> dict:
    """Second differences of alpha -> E_{alpha,t}; all must be <= tolerance."""
    a = np.asarray(alpha_grid, dtype=float)
    if a.size < 5:
        raise RankOneError("need at least 5 alpha values")
    vals = np.array([E_alpha_t(model, ai, t) for ai in a])
    d2 = vals[2:] - 2 * vals[1:-1] + vals[:-2]
    scale = max(np.max(np.abs(vals)), 1.0)
    return {
        "alpha": a,
        "E_alpha_t": vals,
        "second_differences": d2,
        "max_violation": float(max(np.max(d2), 0.0)),
        "concave": bool(np.all(d2 <= 1e-9 * scale)),
    }


def feynman_hellmann_check(model: RankOneModel, alpha: float,
                           h: float = None) -> dict:
    """One-sided derivative bracket at alpha <= 0.

    The map alpha -> E_alpha is concave, so difference quotients from the
    right underestimate and from the left overestimate the respective
    one-sided derivatives; the perturbed atom mass must land in between up
    to the discretization error of the quotients.
    """
    if alpha > 0:
        raise RankOneError("bracket is asserted for alpha <= 0")
    e0 = spectral(model, alpha)
    if h is None:
        h = 1e-4 * max(1.0, abs(e0.E_alpha))
    d_plus = (spectral(model, alpha + h).E_alpha - e0.E_alpha) / h
    d_minus = (e0.E_alpha - spectral(model, alpha - h).E_alpha) / h
    # concavity: the secant slopes bracket the one-sided derivatives from
    # below/above, so a small slack of order h covers smooth curvature
    slack = 10.0 * h + 1e-10
    return {
        "alpha": alpha,
        "E_alpha": e0.E_alpha,
        "atom_mass": e0.atom_mass_alpha,
        "d_plus": d_plus,
        "d_minus": d_minus,
        "holds": d_plus - slack <= e0.atom_mass_alpha <= d_minus + slack,
    }


def atom_mass_profile(model: RankOneModel, alpha_grid) -> np.ndarray:
    """atom_mass_alpha along a grid; nonincreasing for alpha <= 0."""
    return np.array([spectral(model, a).atom_mass_alpha for a in alpha_grid])


def random_model(n: int, seed: int, spread: float = 2.0) -> RankOneModel:
    """Seeded dense model for property tests."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    x = np.sort(rng.uniform(0.0, spread, n))
    w = rng.dirichlet(np.ones(n))
    w = w / w.sum()
    # renormalize exactly; dirichlet sums to 1 only in floating point
    w[-1] = 1.0 - w[:-1].sum()
    return RankOneModel(x, w)
