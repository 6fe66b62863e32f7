"""Desk-scale generalized spin-boson models.

A finite-dimensional system A couples linearly through B to a bosonic field
with finitely many discrete modes (omega_k, nu_k).  Two independent routes
to the same spectral data are implemented: truncated-Fock-space
diagonalization, and Feynman-Kac Monte Carlo over jump paths of the Markov
process generated by the stoquastic part of A, with weight

    exp( (1/2) iint g(t-s) w(X_s) w(X_t) ds dt + int v(X_s) ds ),
    g(t) = sum_k nu_k^2 e^{-omega_k |t|}.

The double integral is evaluated in closed form per pair of path constancy
segments, so Monte Carlo error is the only stochastic axis.  On top sit the
ground-state existence bounds: log(1/rho) <= log(dim) + (1/2T) iint
|t-s| g(t-s) W(s,t) and the paired-path lower bound with kernel g(u+v).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, simpson
from scipy.linalg import eigh
from scipy.special import gamma as gamma_fn
from scipy.special import logsumexp

from . import _kernels
from .measures import AtomComponent, ProbabilityMeasure

STOQUASTIC_TOL = 1e-12


class SpinBosonError(ValueError):
    pass


@dataclass(frozen=True)
class SpinSystem:
    """System matrices in an orthonormal eigenbasis of B.

    ``basis`` columns express that eigenbasis in the coordinates of A and B;
    the default identity means A and B are already written in it.
    """

    A: np.ndarray
    B: np.ndarray
    basis: np.ndarray = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if A.shape != B.shape or A.shape[0] != A.shape[1]:
            raise SpinBosonError("A and B must be square and same shape")
        if not np.allclose(A, A.T) or not np.allclose(B, B.T):
            raise SpinBosonError("A and B must be symmetric")
        U = np.eye(A.shape[0]) if self.basis is None else np.asarray(self.basis, float)
        if not np.allclose(U.T @ U, np.eye(A.shape[0]), atol=1e-12):
            raise SpinBosonError("basis must be orthonormal")
        Bd = U.T @ B @ U
        if np.max(np.abs(Bd - np.diag(np.diag(Bd)))) > 1e-10:
            raise SpinBosonError("basis must diagonalize B")
        object.__setattr__(self, "basis", U)

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class BosonField:
    omegas: np.ndarray
    nus: np.ndarray
    n_max: int

    def __post_init__(self):
        om = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        nu = np.atleast_1d(np.asarray(self.nus, dtype=float))
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "nus", nu)
        if om.shape != nu.shape:
            raise SpinBosonError("omegas and nus must align")
        if np.any(om <= 0.0):
            raise SpinBosonError("mode frequencies must be positive")
        if self.n_max < 1:
            raise SpinBosonError("n_max must be at least 1")


def check_stoquastic(A: np.ndarray, basis: np.ndarray = None) -> bool:
    """True iff all off-diagonal elements of A in the basis are <= tolerance."""
    A = np.asarray(A, dtype=float)
    if basis is not None:
        U = np.asarray(basis, dtype=float)
        A = U.T @ A @ U
    off = A - np.diag(np.diag(A))
    return bool(np.max(off) <= STOQUASTIC_TOL)


@dataclass(frozen=True)
class GSBModel:
    spin: SpinSystem
    field: BosonField
    Q: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    w: np.ndarray = field(default=None)

    def __post_init__(self):
        Q, v, w = build_generator(self.spin)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @property
    def dim_spin(self) -> int:
        return self.spin.dim

    def g(self, t, eps: float = 0.0):
        """Field autocorrelation sum_k nu_k^2 e^{-(omega_k + eps)|t|}."""
        t = np.abs(np.asarray(t, dtype=float))
        nu2 = self.field.nus ** 2
        return np.exp(-np.multiply.outer(t, self.field.omegas + eps)) @ nu2

    @property
    def is_ssb(self) -> bool:
        """Two-level system with v constant and w antisymmetric.

        For this symmetry class the upper bound holds without the log(dim)
        term (the spin product reduces to a jump-parity functional).
        """
        return (self.dim_spin == 2 and abs(self.w[0] + self.w[1]) < 1e-12
                and abs(self.v[0] - self.v[1]) < 1e-12)


def build_generator(spin: SpinSystem):
    """Markov generator Q = -A - diag(v) plus the FK couplings v, w."""
    U = spin.basis
    A = U.T @ spin.A @ U
    if not check_stoquastic(A):
        raise SpinBosonError("A is not stoquastic in the given basis")
    v = -A.sum(axis=1)
    w = -np.diag(U.T @ spin.B @ U).copy()
    Q = -A - np.diag(v)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q, v, w


def ssb_model(omega: float = 1.0, nu: float = 0.2, coupling: float = 1.0,
              n_max: int = 12) -> GSBModel:
    """Standard spin-boson model: A = -sigma_x, B = coupling * sigma_z."""
    sx = np.array([[0.0, -1.0], [-1.0, 0.0]])
    sz = np.diag([coupling, -coupling])
    return GSBModel(SpinSystem(sx, sz), BosonField([omega], [nu], n_max))


def _mode_ops(n_max: int):
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1)
    return a, a.T @ a


def assemble_truncated(model: GSBModel, n_max: int = None, cap: int = 20000):
    """Dense H, boson number N, and the reference vector psi.

    H = A x 1 + 1 x dGamma(omega) + B x (a(nu) + a*(nu)) with per-mode
    occupation cutoff; psi is uniform spin tensor Fock vacuum.
    """
    nm = model.field.n_max if n_max is None else n_max
    omegas, nus = model.field.omegas, model.field.nus
    k = omegas.size
    d = model.dim_spin
    dim_f = (nm + 1) ** k
    if d * dim_f > cap:
        raise SpinBosonError(f"truncated dimension {d * dim_f} exceeds cap {cap}")
    a1, n1 = _mode_ops(nm)
    eye1 = np.eye(nm + 1)
    dgamma = np.zeros((dim_f, dim_f))
    number = np.zeros((dim_f, dim_f))
    xfield = np.zeros((dim_f, dim_f))
    for j in range(k):
        ops_n, ops_x = [], []
        for i in range(k):
            ops_n.append(n1 if i == j else eye1)
            ops_x.append(a1 + a1.T if i == j else eye1)
        mj = ops_n[0]
        xj = ops_x[0]
        for i in range(1, k):
            mj = np.kron(mj, ops_n[i])
            xj = np.kron(xj, ops_x[i])
        dgamma += omegas[j] * mj
        number += mj
        xfield += nus[j] * xj
    U = model.spin.basis
    A = U.T @ model.spin.A @ U
    B = U.T @ model.spin.B @ U
    eye_d = np.eye(d)
    eye_f = np.eye(dim_f)
    H = np.kron(A, eye_f) + np.kron(eye_d, dgamma) + np.kron(B, xfield)
    N = np.kron(eye_d, number)
    psi = np.zeros(d * dim_f)
    psi[np.arange(d) * dim_f] = 1.0 / math.sqrt(d)
    return H, N, psi


@dataclass(frozen=True)
class GroundData:
    E: float
    rho: float
    phi_N: float
    spectrum_head: np.ndarray
    mean: float               # m = <psi, H psi>, first moment of mu
    converged: bool
    gate: tuple


def exact_ground(model: GSBModel, n_max: int = None, gate_atol: float = 1e-8,
                 require_converged: bool = True) -> GroundData:
    """Ground data by truncated diagonalization with a convergence gate.

    E and rho must each move less than ``gate_atol`` when the per-mode
    cutoff grows by 2, otherwise the truncation is flagged (or rejected).
    """
    nm = model.field.n_max if n_max is None else n_max

    def solve(cut):
        H, N, psi = assemble_truncated(model, cut)
        vals, vecs = eigh(H)
        scale = max(vals[-1] - vals[0], 1.0)
        sel = vals <= vals[0] + 1e-10 * scale
        proj = vecs[:, sel] @ (vecs[:, sel].T @ psi)
        rho = float(proj @ proj)
        if rho > 0:
            phi = proj / math.sqrt(rho)
            phi_n = float(phi @ N @ phi)
        else:
            phi_n = math.inf
        m = float(psi @ H @ psi)
        return float(vals[0]), rho, phi_n, vals[:min(10, vals.size)], m

    e1, r1, pn1, head, m = solve(nm)
    e2, r2, _, _, _ = solve(nm + 2)
    gate = (abs(e2 - e1), abs(r2 - r1))
    ok = gate[0] <= gate_atol and gate[1] <= gate_atol
    if require_converged and not ok:
        raise SpinBosonError(
            f"truncation not converged: dE={gate[0]:.2e}, drho={gate[1]:.2e}")
    return GroundData(e1, r1, pn1, head, m, ok, gate)


def exact_log_Z(model: GSBModel, T: float, n_max: int = None) -> float:
    """log <psi, e^{-TH} psi> from the truncated eigendecomposition."""
    H, _, psi = assemble_truncated(model, n_max)
    vals, vecs = eigh(H)
    ov = vecs.T @ psi
    return float(logsumexp(-T * vals, b=ov ** 2))


def spectral_measure(model: GSBModel, n_max: int = None,
                     weight_floor: float = 1e-14) -> ProbabilityMeasure:
    """Spectral measure of the truncated H with respect to psi.

    Degenerate eigenvalues are merged; weights below the floor are dropped
    and the rest renormalized, so the atoms feed straight into the generic
    Laplace-quotient estimators.
    """
    H, _, psi = assemble_truncated(model, n_max)
    vals, vecs = eigh(H)
    ov2 = (vecs.T @ psi) ** 2
    scale = max(vals[-1] - vals[0], 1.0)
    atoms = []
    i = 0
    while i < vals.size:
        j = i
        mass = 0.0
        while j < vals.size and vals[j] <= vals[i] + 1e-10 * scale:
            mass += ov2[j]
            j += 1
        if mass > weight_floor:
            atoms.append((vals[i], mass))
        i = j
    total = sum(m for _, m in atoms)
    return ProbabilityMeasure(
        atoms=[AtomComponent(float(x), float(m / total)) for x, m in atoms],
        densities=[])


def infrared_integral(model: GSBModel, alpha_exponent: float,
                      quadrature: bool = False) -> float:
    """int_0^infty s^{2a-1} g(s) ds = Gamma(2a) sum_k nu_k^2 omega_k^{-2a}."""
    if alpha_exponent <= 0:
        raise SpinBosonError("alpha_exponent must be positive")
    a = alpha_exponent
    nu2 = model.field.nus ** 2
    if quadrature:
        val, _ = quad(lambda s: s ** (2 * a - 1) * float(model.g(s)),
                      0.0, np.inf, epsabs=1e-12, epsrel=1e-12)
        return val
    return float(gamma_fn(2 * a) * np.sum(nu2 * model.field.omegas ** (-2 * a)))


def regularized_family(model: GSBModel, epsilon: float) -> GSBModel:
    """H + epsilon N, i.e. every mode frequency shifted by epsilon.

    On the FK side this is exactly g -> e^{-eps|t|} g, so the two routes
    agree by construction.
    """
    if epsilon < 0:
        raise SpinBosonError("epsilon must be nonnegative")
    f = model.field
    return GSBModel(model.spin, BosonField(f.omegas + epsilon, f.nus, f.n_max))


def _sample_block_paths(model: GSBModel, T: float, count: int,
                        rng: np.random.Generator):
    """Jump paths of Q on [0, T] as flat segment arrays plus offsets.

    Holding time in state i is Exp(-Q_ii); absorbing states (rate 0) never
    jump.  Draw order per path is fixed, so the block is reproducible.
    """
    d = model.dim_spin
    rates = -np.diag(model.Q)
    jump_cdf = np.zeros((d, d))
    for i in range(d):
        if rates[i] > 0:
            row = model.Q[i].copy()
            row[i] = 0.0
            jump_cdf[i] = np.cumsum(row / rates[i])
    seg_t, seg_len, seg_state = [], [], []
    offsets = np.zeros(count + 1, dtype=np.int64)
    starts = rng.integers(0, d, count)
    for p in range(count):
        t_cur = 0.0
        state = int(starts[p])
        n_seg = 0
        while True:
            if rates[state] <= 0.0:
                hold = T - t_cur
            else:
                hold = min(rng.exponential(1.0 / rates[state]), T - t_cur)
            seg_t.append(t_cur)
            seg_len.append(hold)
            seg_state.append(state)
            n_seg += 1
            t_cur += hold
            if t_cur >= T:
                break
            state = int(np.searchsorted(jump_cdf[state], rng.random()))
        offsets[p + 1] = offsets[p] + n_seg
    return (np.asarray(seg_t), np.asarray(seg_len),
            np.asarray(seg_state, dtype=np.int64), offsets)


@dataclass
class FKEstimate:
    n_paths: int
    logZ: float
    se: float
    ess: float
    corr: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"n_paths": self.n_paths, "logZ": self.logZ, "se": self.se,
               "ess": self.ess}
        for k, v in self.corr.items():
            out[k] = np.asarray(v).tolist()
        return out


def _log_weights(model: GSBModel, T: float, n_paths: int, seed: int,
                 workers: int, eps: float, tgrid=None):
    """Per-path log FK weights (and optional grid probes), block-ordered."""
    omegas = model.field.omegas
    nu2 = model.field.nus ** 2

    def one_block(b, count):
        rng = _kernels.block_rng(seed, b)
        seg_t, seg_len, seg_state, offsets = _sample_block_paths(model, T, count, rng)
        logw = np.empty(count)
        _kernels.fk_pair_sum(seg_t, seg_len, seg_state, offsets,
                             model.w, model.v, omegas, nu2, eps, logw)
        if tgrid is None:
            return logw, None, None
        states = np.empty((count, len(tgrid)), dtype=np.int64)
        jumps = np.empty((count, len(tgrid)), dtype=np.int64)
        _kernels.path_probe(seg_t, seg_state, offsets,
                            np.asarray(tgrid, dtype=float), states, jumps)
        return logw, states, jumps

    parts = _kernels.run_blocks(one_block, n_paths, workers)
    logw = np.concatenate([p[0] for p in parts])
    if tgrid is None:
        return logw, None, None
    states = np.concatenate([p[1] for p in parts])
    jumps = np.concatenate([p[2] for p in parts])
    return logw, states, jumps


def _log_mean_exp_se(logw: np.ndarray, n_folds: int = 32):
    """log-mean-exp with jackknife-over-folds standard error and ESS."""
    n = logw.size
    lz = float(logsumexp(logw) - math.log(n))
    ess = float(math.exp(2 * logsumexp(logw) - logsumexp(2 * logw)))
    folds = np.array_split(np.arange(n), min(n_folds, n))
    k = len(folds)
    total = logsumexp(logw)
    loo = np.array([
        logsumexp(logw[np.setdiff1d(np.arange(n), f, assume_unique=True)])
        - math.log(n - f.size) for f in folds])
    se = float(math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2)))
    return lz, se, ess, total


def fk_mc_Z(model: GSBModel, T: float, n_paths: int, seed: int,
            workers: int = 1, eps: float = 0.0,
            ess_floor: float = 100.0) -> FKEstimate:
    """Monte Carlo estimate of log Z_T = log <psi, e^{-TH} psi>."""
    logw, _, _ = _log_weights(model, T, n_paths, seed, workers, eps)
    lz, se, ess, _ = _log_mean_exp_se(logw)
    est = FKEstimate(n_paths, lz, se, ess)
    if ess < ess_floor:
        est.corr["ess_warning"] = f"ESS {ess:.1f} below floor {ess_floor}"
    return est


def fk_correlations(model: GSBModel, T: float, tgrid, n_paths: int, seed: int,
                    workers: int = 1, eps: float = 0.0) -> FKEstimate:
    """Self-normalized path-measure correlations on tgrid x tgrid.

    corr["w_pair"][i, j] estimates E_T[w(X_s) w(X_t)] at s = tgrid[i],
    t = tgrid[j].  For symmetric two-level models corr["jump_parity"] holds
    the same quantity computed from (-1)^{#jumps in (s, t]} times w(X_s)^2,
    an identity specific to that symmetry class.
    """
    tg = np.asarray(tgrid, dtype=float)
    logw, states, jumps = _log_weights(model, T, n_paths, seed, workers, eps,
                                       tgrid=tg)
    lz, se, ess, _ = _log_mean_exp_se(logw)
    rho = np.exp(logw - logw.max())
    rho /= rho.sum()
    wvals = model.w[states]
    w_pair = (wvals * rho[:, None]).T @ wvals
    est = FKEstimate(n_paths, lz, se, ess, corr={"tgrid": tg, "w_pair": w_pair})
    if model.is_ssb:
        # X_s X_t = (-1)^{#jumps in (s,t]}; w(X_s) w(X_t) = w(1)^2 X_s X_t
        par = np.empty_like(w_pair)
        amp = model.w[0] ** 2
        for i in range(tg.size):
            sign = np.where((np.abs(jumps - jumps[:, i][:, None]) % 2) == 0, 1.0, -1.0)
            par[i] = amp * (sign * rho[:, None]).sum(axis=0)
        est.corr["jump_parity"] = par
    return est


def bound_log_inv_rho_upper(model: GSBModel, T: float,
                            correlations: FKEstimate = None,
                            n_paths: int = 20000, seed: int = 0,
                            workers: int = 1, grid_n: int = 64) -> float:
    """Upper bound log(1/rho) <= [log dim] + (1/2T) iint |t-s| g(t-s) W(s,t).

    The log(dim) term is dropped for the symmetric two-level class where
    the jump-parity identity removes it.
    """
    if correlations is None:
        tg = np.linspace(0.0, T, grid_n + 1)
        correlations = fk_correlations(model, T, tg, n_paths, seed, workers)
    tg = correlations.corr["tgrid"]
    W = correlations.corr["w_pair"]
    kernel = np.abs(tg[:, None] - tg[None, :])
    kernel = kernel * np.asarray(model.g(kernel))
    inner = simpson(kernel * W, x=tg, axis=1)
    val = float(simpson(inner, x=tg) / (2.0 * T))
    if not model.is_ssb:
        val += math.log(model.dim_spin)
    return val


def bound_log_inv_rho_lower(model: GSBModel, T: float, n_paths: int,
                            seed: int, workers: int = 1,
                            grid_n: int = 64) -> float:
    """Lower bound iint g(u+v) E_{T,T}[w(X_u) w(Y_v) | X_0 = Y_0] du dv.

    X and Y are independent T-horizon path ensembles; the conditioning is a
    self-normalized restriction to pairs with equal starting states.
    """
    tg = np.linspace(0.0, T, grid_n + 1)
    lx, sx, _ = _log_weights(model, T, n_paths, seed, workers, 0.0, tgrid=tg)
    ly, sy, _ = _log_weights(model, T, n_paths, seed + 1, workers, 0.0, tgrid=tg)
    eq = sx[:, 0] == sy[:, 0]
    lw = lx + ly
    rho = np.exp(lw - lw[eq].max()) * eq
    rho /= rho.sum()
    wx = model.w[sx]
    wy = model.w[sy]
    table = (wx * rho[:, None]).T @ wy
    kernel = np.asarray(model.g(tg[:, None] + tg[None, :]))
    inner = simpson(kernel * table, x=tg, axis=1)
    return float(simpson(inner, x=tg))
