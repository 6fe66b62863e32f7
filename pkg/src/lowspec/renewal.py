"""Renewal transform of a measure, realized as an M/G/infinity queue.

A probability measure with support infimum E and mean m defines an
alternating renewal process whose dormant probability reproduces the
normalized Laplace transform: P(X_t = 0) = e^{Et} Z_t.  The process is the
idle/busy indicator of an M/G/infinity queue with arrival rate beta = m - E
and service density q(tau)/beta, where q(tau) is the variance of the tilted
measure e^{-tau x} mu(dx) / Z_tau.  Simulating the queue turns the abstract
limit theorems (atom mass, inverse moment, Stieltjes transform) into Monte
Carlo identities that can be checked against quadrature.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.integrate import trapezoid

from . import _kernels
from .laplace import LaplaceEvaluator
from .measures import ProbabilityMeasure, stieltjes_transform


class RenewalError(ValueError):
    pass


@dataclass(frozen=True)
class RenewalTransform:
    """Arrival rate and tabulated service distribution of the queue."""

    measure: ProbabilityMeasure
    evaluator: LaplaceEvaluator
    E: float
    m: float
    beta: float
    tau: np.ndarray          # grid including 0, geometric beyond tau_min
    q: np.ndarray            # intensity q(tau) = Var of the tilted measure
    cdf: np.ndarray          # trapezoid-integrated q / beta on tau
    tail_kind: str           # "exp" | "power" | "none"
    tail_param: float        # decay rate (exp) or exponent (power)
    tail_mass: float         # analytic integral of q beyond tau[-1], / beta
    mass_error: float        # |cdf[-1] + tail_mass - 1|

    @property
    def degenerate(self) -> bool:
        return self.beta == 0.0

    def sample_service(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF service times from uniforms in (0,1).

        Uniforms above the tabulated mass map to the fitted analytic tail,
        so heavy-tailed services (infinite-mean busy periods) stay sampleable.
        """
        total = self.cdf[-1] + self.tail_mass
        u = u * total
        body = u <= self.cdf[-1]
        out = np.empty_like(u)
        out[body] = np.interp(u[body], self.cdf, self.tau)
        if not body.all():
            v = (u[~body] - self.cdf[-1]) / self.tail_mass  # uniform in (0,1)
            tmax = self.tau[-1]
            if self.tail_kind == "exp":
                out[~body] = tmax - np.log1p(-v) / self.tail_param
            else:
                out[~body] = tmax * (1.0 - v) ** (-1.0 / (self.tail_param - 1.0))
        return out

    def truncation_report(self) -> dict:
        return {
            "tau_max": float(self.tau[-1]),
            "tail_kind": self.tail_kind,
            "tail_param": float(self.tail_param),
            "tail_mass_fraction": float(self.tail_mass),
            "intensity_mass_error": float(self.mass_error),
        }


def build_renewal_transform(measure: ProbabilityMeasure,
                            tau_min: float = 1e-4,
                            tau_max: float = 1e4,
                            n_grid: int = 2048,
                            mass_rtol: float = 1e-3) -> RenewalTransform:
    """Tabulate the queue data (beta, service CDF) of a measure.

    The intensity q integrates to beta = m - E exactly; the tabulated mass
    plus the fitted analytic tail must reproduce that within ``mass_rtol``.
    Dirac measures yield the degenerate, permanently dormant transform.
    """
    ev = LaplaceEvaluator(measure)
    E, m = ev.E, ev.m
    beta = m - E
    if beta <= 1e-14:
        z = np.zeros(1)
        return RenewalTransform(measure, ev, E, m, 0.0, z, z, np.ones(1),
                                "none", 0.0, 0.0, 0.0)
    tau = np.concatenate([[0.0], np.geomspace(tau_min, tau_max, n_grid)])
    q = np.array([ev.tilted_stats(t).var for t in tau])
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (q[1:] + q[:-1]) * np.diff(tau))]) / beta

    tail_kind, tail_param, tail_mass = _fit_tail(tau, q, beta)
    total = cum[-1] + tail_mass
    mass_error = abs(total - 1.0)
    if mass_error > mass_rtol:
        raise RenewalError(
            f"intensity mass {total:.6f} deviates from 1 beyond rtol {mass_rtol}")
    return RenewalTransform(measure, ev, E, m, beta, tau, q, cum,
                            tail_kind, tail_param, tail_mass, mass_error)


def _fit_tail(tau: np.ndarray, q: np.ndarray, beta: float):
    """Fit q on its last positive decade as C e^{-lam tau} or C tau^{-p}.

    Returns (kind, parameter, tail mass beyond tau[-1] normalized by beta).
    The better least-squares fit in log space wins; if q already underflows
    to zero before the end of the grid the tail carries no mass.
    """
    pos = q > 1e-280
    if not pos[-1]:
        return "none", 0.0, 0.0
    t_end = tau[-1]
    sel = pos & (tau >= t_end / 10.0)
    if sel.sum() < 8:
        return "none", 0.0, 0.0
    ts, qs = tau[sel], np.log(q[sel])
    exp_fit = np.polyfit(ts, qs, 1)
    exp_res = np.sum((np.polyval(exp_fit, ts) - qs) ** 2)
    pow_fit = np.polyfit(np.log(ts), qs, 1)
    pow_res = np.sum((np.polyval(pow_fit, np.log(ts)) - qs) ** 2)
    q_end = q[-1]
    if exp_res <= pow_res:
        lam = -exp_fit[0]
        if lam <= 0.0:
            return "none", 0.0, 0.0
        return "exp", lam, q_end / lam / beta
    p = -pow_fit[0]
    if p <= 1.0:
        raise RenewalError(
            f"power tail exponent {p:.3f} <= 1 contradicts finite mean")
    return "power", p, q_end * t_end / (p - 1.0) / beta


@dataclass
class SimStats:
    """Aggregated first-cycle and occupation statistics of simulated paths."""

    n_paths: int
    horizon: float
    beta: float
    tgrid: np.ndarray
    zero_counts: np.ndarray
    d1: np.ndarray
    a1: np.ndarray
    t1: np.ndarray
    d1_censored: np.ndarray
    a1_censored: np.ndarray
    dormant: np.ndarray      # total dormant time on [0, horizon] per path
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def p_zero(self):
        """P(X_t = 0) on tgrid with binomial standard errors."""
        p = self.zero_counts / self.n_paths
        se = np.sqrt(np.maximum(p * (1.0 - p), 0.0) / self.n_paths)
        return p, se

    def _mean_se(self, x):
        n = x.size
        m = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return m, se

    @property
    def e_d1(self):
        return self._mean_se(self.d1)

    @property
    def e_a1(self):
        return self._mean_se(self.a1)

    @property
    def e_a1_sq(self):
        return self._mean_se(self.a1 ** 2)

    @property
    def e_t1(self):
        return self._mean_se(self.t1)

    @property
    def censor_fraction(self) -> float:
        return float(np.mean(self.a1_censored))

    @property
    def no_arrival_fraction(self) -> float:
        return float(np.mean(self.d1_censored))

    @property
    def e_dormant_fraction(self):
        return self._mean_se(self.dormant / self.horizon)

    @property
    def v_dormant(self) -> float:
        return float(np.var(self.dormant, ddof=1))

    def to_dict(self) -> dict:
        p, se = self.p_zero()
        def pair(v):
            return {"value": v[0], "se": v[1]}
        return {
            "n_paths": self.n_paths,
            "horizon": self.horizon,
            "beta": self.beta,
            "tgrid": self.tgrid.tolist(),
            "p_zero": p.tolist(),
            "p_zero_se": se.tolist(),
            "E_d1": pair(self.e_d1),
            "E_a1": pair(self.e_a1),
            "E_a1_sq": pair(self.e_a1_sq),
            "E_T1": pair(self.e_t1),
            "censor_fraction": self.censor_fraction,
            "no_arrival_fraction": self.no_arrival_fraction,
            "E_dormant_fraction": pair(self.e_dormant_fraction),
            "V_dormant": self.v_dormant,
        }


def sample_paths(transform: RenewalTransform, T: float, n: int, seed: int,
                 tgrid=None, workers: int = 1) -> SimStats:
    """Simulate n queue paths on [0, T] and collect SimStats.

    Path i of block b consumes only draws from the stream keyed by
    (seed, b), so the result depends on (seed, n) but not on ``workers``.
    """
    if transform.degenerate:
        raise RenewalError("Dirac measure: permanently dormant, nothing to simulate")
    if T <= 0:
        raise RenewalError("horizon must be positive")
    tg = np.asarray([T] if tgrid is None else tgrid, dtype=float)
    if np.any((tg < 0) | (tg > T)) or np.any(np.diff(tg) < 0):
        raise RenewalError("tgrid must be sorted within [0, T]")
    beta = transform.beta

    def one_block(b, count):
        rng = _kernels.block_rng(seed, b)
        n_arr = rng.poisson(beta * T, count)
        offsets = np.zeros(count + 1, dtype=np.int64)
        np.cumsum(n_arr, out=offsets[1:])
        tot = int(offsets[-1])
        u = rng.random(tot) * T
        su = rng.random(tot)
        path_ids = np.repeat(np.arange(count), n_arr)
        order = np.lexsort((u, path_ids))
        u = np.ascontiguousarray(u[order])
        s = transform.sample_service(su)
        d1 = np.empty(count)
        a1 = np.empty(count)
        t1 = np.empty(count)
        d1c = np.zeros(count, dtype=np.uint8)
        a1c = np.zeros(count, dtype=np.uint8)
        dorm = np.empty(count)
        zc = np.zeros(tg.size, dtype=np.int64)
        _kernels.queue_sweep(u, s, offsets, T, tg, d1, a1, t1, d1c, a1c, dorm, zc)
        return d1, a1, t1, d1c, a1c, dorm, zc

    parts = _kernels.run_blocks(one_block, n, workers)
    cat = lambda i: np.concatenate([p[i] for p in parts])
    zero_counts = np.sum([p[6] for p in parts], axis=0)
    return SimStats(n, T, beta, tg, zero_counts,
                    cat(0), cat(1), cat(2), cat(3), cat(4), cat(5), seed=seed)


def dormant_probability_check(transform: RenewalTransform, stats: SimStats):
    """MC P(X_t=0) against the exact e^{Et} Z_t, per grid point.

    Returns (mc, se, exact) arrays; the identity defines the transform, so
    disagreement beyond a few s.e. indicates a sampler or tabulation bug.
    """
    p, se = stats.p_zero()
    ev = transform.evaluator
    exact = np.array([math.exp(ev.E * t + ev.log_Z(t)) for t in stats.tgrid])
    return p, se, exact


def d1_ks_test(stats: SimStats) -> float:
    """KS p-value of uncensored d1 samples against Exp(beta) truncated at T."""
    x = stats.d1[stats.d1_censored == 0]
    if x.size == 0:
        return 1.0
    b, T = stats.beta, stats.horizon
    denom = -math.expm1(-b * T)
    return float(sps.kstest(x, lambda v: -np.expm1(-b * v) / denom).pvalue)


def atom_via_renewal(stats: SimStats):
    """Atom mass estimate 1/(1 + beta E[a1]) with delta-method s.e.

    Censored first cycles enter at their truncated length, which biases
    E[a1] down and the atom estimate up; the censor fraction in SimStats
    quantifies how much weight that convention carries.
    """
    a, se_a = stats.e_a1
    b = stats.beta
    val = 1.0 / (1.0 + b * a)
    return val, b * se_a * val * val


def inverse_moment_via_renewal(stats: SimStats):
    """Estimate of int (x-E)^{-1} mu(dx) = beta E[a1^2] / (2 (1+beta E[a1])^2).

    Standard error by the delta method with the sample covariance of
    (a1, a1^2).
    """
    b = stats.beta
    a1 = stats.a1
    m1 = float(np.mean(a1))
    m2 = float(np.mean(a1 ** 2))
    denom = 1.0 + b * m1
    val = b * m2 / (2.0 * denom * denom)
    cov = np.cov(np.stack([a1, a1 ** 2])) / a1.size
    g = np.array([-b * b * m2 / denom ** 3, b / (2.0 * denom * denom)])
    se = float(math.sqrt(max(g @ cov @ g, 0.0)))
    return val, se


def stieltjes_check(transform: RenewalTransform, stats: SimStats, z: complex):
    """Both sides of the Stieltjes identity at z with Re z < E.

    lhs integrates (x-z)^{-1} against the measure; rhs uses the first
    regeneration time: (m-z)^{-1} (1 - E[e^{(z-E)T1}; T1 < infinity])^{-1}.
    Censored cycles contribute 0 to the expectation; the neglected mass is
    bounded by e^{(Re z - E) T}.
    """
    E = transform.E
    if z.real >= E:
        raise RenewalError("need Re z < E")
    lhs = stieltjes_transform(transform.measure, z)
    t1 = stats.t1[stats.a1_censored == 0]
    vals = np.exp((z - E) * t1)
    mean = np.sum(vals) / stats.n_paths
    rhs = 1.0 / ((transform.m - z) * (1.0 - mean))
    # s.e. of rhs through the linearization in the sample mean; censored
    # paths count as zeros in the population, hence the full-sample std
    pop = np.zeros(stats.n_paths, dtype=complex)
    pop[: vals.size] = vals
    se_mean = float(np.std(np.abs(pop), ddof=1) / math.sqrt(stats.n_paths)) \
        if stats.n_paths > 1 else math.inf
    se = abs(1.0 / ((transform.m - z) * (1.0 - mean) ** 2)) * se_mean
    bias_bound = math.exp((z.real - E) * stats.horizon)
    return lhs, rhs, se, bias_bound


@dataclass(frozen=True)
class ClassifyThresholds:
    censor_cut: float = 0.02      # censor fraction regarded as "essentially none"
    stable_rtol: float = 0.25     # relative drift allowed under horizon doubling
    growth_factor: float = 1.4    # E[a1] growth marking a heavy busy period


def classify_singularity(stats_T: SimStats, stats_2T: SimStats,
                         thresholds: ClassifyThresholds = ClassifyThresholds()) -> str:
    """Diagnose which of the four singularity regimes the data resembles.

    atom-full       no arrival ever observed (mu = delta_E)
    atom-partial    first cycles complete, E[T1] stable under doubling
    no-atom-heavy   cycles complete eventually but E[a1] keeps growing
    no-atom-light   a stable positive fraction of busy periods never ends

    Finite-sample heuristic over two horizons; "inconclusive" when doubling
    the horizon changes the picture.
    """
    th = thresholds
    if stats_T.no_arrival_fraction > 0.999 and stats_2T.no_arrival_fraction > 0.999:
        return "atom-full"
    c1, c2 = stats_T.censor_fraction, stats_2T.censor_fraction
    a1, _ = stats_T.e_a1
    a2, _ = stats_2T.e_a1
    if c1 <= th.censor_cut and c2 <= th.censor_cut:
        t1m, _ = stats_T.e_t1
        t2m, _ = stats_2T.e_t1
        if abs(t2m - t1m) <= th.stable_rtol * max(t1m, t2m):
            return "atom-partial"
        return "inconclusive"
    if c1 > th.censor_cut and c2 > th.censor_cut \
            and abs(c2 - c1) <= th.stable_rtol * max(c1, c2):
        return "no-atom-light"
    if c2 < c1 and a2 > th.growth_factor * a1:
        return "no-atom-heavy"
    return "inconclusive"


def conditioned_dormancy_check(transform: RenewalTransform, t: float,
                               kappa: float, n: int, seed: int,
                               workers: int = 1):
    """Conditioned vs unconditioned dormant probability at kappa*t.

    lhs is the exact conditional P_t(X_{kappa t} = 0) = Z_{kappa t}
    Z_{(1-kappa)t} / Z_t; rhs the MC estimate of the unconditioned
    P(X_{kappa t} = 0).  Both converge to the atom mass.
    """
    if not 0.0 < kappa < 1.0:
        raise RenewalError("kappa must lie in (0, 1)")
    ev = transform.evaluator
    lhs = math.exp(ev.log_quotient(kappa * t, t))
    stats = sample_paths(transform, t, n, seed, tgrid=[kappa * t], workers=workers)
    p, se = stats.p_zero()
    return lhs, float(p[0]), float(se[0])
