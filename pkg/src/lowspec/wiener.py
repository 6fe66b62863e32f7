"""Atom-mass and inverse-moment estimators built from Laplace quotients.

The quotient estimator reads ``Z(kt) Z((1-k)t) / Z(t)``; the averaged
estimator time-averages the same quotient over the split point; and the
second-order estimator extracts ``int (x-E)^-1 dmu`` from a difference of
single and double time integrals of quotients.  Everything is an exact
functional of ``log Z`` - no sampling here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, simpson

from .laplace import LaplaceEvaluator
from .measures import quadrature_nodes


def atom_quotient_estimate(ev: LaplaceEvaluator, kappa: float, t: float) -> float:
    """``Z(kt) Z((1-k)t) / Z(t)``; tends to the atom mass at the bottom."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if t <= 0:
        raise ValueError("t must be positive")
    return math.exp(ev.log_quotient(kappa * t, t))


def atom_average_estimate(ev: LaplaceEvaluator, t: float, tol: float = 1e-12) -> float:
    """Time average ``(1/t) int_0^t Z(s)Z(t-s)/Z(t) ds``.

    The integrand is symmetric about ``t/2`` and u-shaped, so we integrate
    ``(2/t) int_0^{t/2}`` with adaptive quadrature; the sharp drop sits at
    ``s = 0``, which the subdivision resolves.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    half = 0.5 * t

    def f(s: float) -> float:
        return math.exp(ev.log_quotient(s, t))

    val, _ = quad(f, 0.0, half, epsabs=tol, epsrel=tol, limit=400)
    return min(1.0, 2.0 * val / t)


def fubini_average_oracle(ev: LaplaceEvaluator, t: float) -> float:
    """Independent route to ``(1/t) int_0^t Z(s) Z(t-s) ds``.

    Evaluates the equivalent double integral of the symmetric kernel
    ``f_t(x, y) = (e^{-tx} - e^{-ty}) / (t (y - x))`` against the product
    measure: atoms as exact sums, densities by tensor quadrature.  Used
    only to cross-check the time-quadrature route at moderate ``t``.
    """
    xs = [a.location for a in ev.measure.atoms]
    ws = [a.mass for a in ev.measure.atoms]
    for d in ev.measure.densities:
        x, w = quadrature_nodes(d)
        xs.extend(x.tolist())
        ws.extend(w.tolist())
    x = np.asarray(xs)
    w = np.asarray(ws)
    dx = x[:, None] - x[None, :]
    xmin = np.minimum(x[:, None], x[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = -np.expm1(-t * np.abs(dx)) / (t * np.abs(dx))
    kern = np.where(dx == 0.0, 1.0, kern)
    f = np.exp(-t * xmin) * kern
    return float(w @ f @ w)


@dataclass(frozen=True)
class InverseMomentEstimate:
    """Second-order estimate with its grid diagnostics."""

    value: float
    a1: float
    a2: float
    t: float
    n: int
    refinement_gap: float | None = None
    ill_conditioned: bool = False


def _composite_weights(k: int) -> np.ndarray:
    """Fourth-order composite weights (unit spacing) on ``k`` intervals.

    Plain Simpson for even ``k``; Simpson plus a trailing 3/8 rule for odd
    ``k >= 3``; trapezoid for ``k = 1`` (its O(h^3) local error is summed
    once per row and stays below the Simpson tail).
    """
    w = np.zeros(k + 1)
    if k == 0:
        return w
    if k == 1:
        w[:2] = 0.5
        return w
    m = k if k % 2 == 0 else k - 3
    if m > 0:
        w[0] += 1.0 / 3.0
        w[m] += 1.0 / 3.0
        w[1:m:2] += 4.0 / 3.0
        w[2:m:2] += 2.0 / 3.0
    if k % 2 == 1:
        w[k - 3] += 3.0 / 8.0
        w[k - 2] += 9.0 / 8.0
        w[k - 1] += 9.0 / 8.0
        w[k] += 3.0 / 8.0
    return w


def _quotient_integrals(ev: LaplaceEvaluator, t: float, n: int) -> tuple[float, float]:
    """Grid values of A1 = int q(s) ds and A2 = int int q2(s,r) dr ds.

    ``q(s) = Z(t-s)Z(s)/Z(t)`` and ``q2(s,r) = Z(t-s)Z(s-r)Z(r)/Z(t)``;
    both lie in (0, 1] so the grid works entirely on exponentiated
    quotients with no overflow.  Fourth-order composite (Simpson family)
    weights in both directions of the triangular grid.
    """
    if n % 2:
        raise ValueError("grid resolution must be even")
    h = t / n
    lz = ev.log_Z_many(np.arange(n + 1) * h)
    i = np.arange(n + 1)
    q1 = np.exp(np.minimum(lz[n - i] + lz[i] - lz[n], 0.0))
    a1 = float(simpson(q1, dx=h))
    # triangular grid: Q[i, j] = q2(s_i, r_j) for j <= i
    Q = np.exp(
        np.minimum(
            lz[n - i][:, None]
            + lz[np.abs(i[:, None] - i[None, :])]
            + lz[i][None, :]
            - lz[n],
            0.0,
        )
    )
    Q[i[:, None] < i[None, :]] = 0.0
    wgt = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        wgt[k, : k + 1] = _composite_weights(k)
    inner = h * np.sum(Q * wgt, axis=1)
    a2 = float(simpson(inner, dx=h))
    return a1, a2


def inverse_moment_estimate(
    ev: LaplaceEvaluator,
    t: float,
    n: int = 512,
    refine: bool = True,
    refine_rtol: float = 1e-3,
) -> InverseMomentEstimate:
    """Estimate ``int (x-E)^-1 dmu`` from ``[2 A2 - A1^2] / [2 A1]``.

    The numerator is a difference of O(t^2) terms with an O(1) limit, so
    both terms are normalized by ``t`` before differencing and a grid
    refinement check (n vs 2n) guards the reported value.
    """
    if t <= 0:
        raise ValueError("t must be positive")

    def _value(nn: int) -> tuple[float, float, float]:
        a1, a2 = _quotient_integrals(ev, t, nn)
        num = 2.0 * (a2 / t) - (a1 / t) * a1
        return t * num / (2.0 * a1), a1, a2

    value, a1, a2 = _value(n)
    gap = None
    if refine:
        v2, a1, a2 = _value(2 * n)
        gap = abs(v2 - value) / max(abs(v2), 1e-30)
        if gap > refine_rtol:
            raise ArithmeticError(
                f"grid refinement n={n} vs {2*n} disagrees by {gap:.2e} "
                f"(> {refine_rtol:.0e})"
            )
        value = v2
    ill = value < 0
    if ill and value < -1e-6 * max(1.0, a1):
        raise ArithmeticError(
            f"numerator negative beyond tolerance: value={value}, A1={a1}, A2={a2}"
        )
    return InverseMomentEstimate(
        value=max(value, 0.0), a1=a1, a2=a2, t=t, n=2 * n if refine else n,
        refinement_gap=gap, ill_conditioned=ill,
    )


@dataclass
class EstimatorRun:
    """Values of one estimator along an increasing time schedule."""

    t_schedule: list[float]
    values: list[float]
    converged: bool
    extrapolated: float | None = None


def run_schedule(
    estimator,
    t_schedule,
    convergence_window: int = 2,
    rtol: float = 1e-4,
    extrapolate: bool = False,
) -> EstimatorRun:
    """Evaluate ``estimator(t)`` along the schedule with a windowed stop rule.

    Convergence is declared when the last ``convergence_window`` successive
    relative changes all fall below ``rtol``; optional Richardson-style
    extrapolation fits ``v(t) = v_inf + c/t`` on the final two points.
    """
    ts = [float(t) for t in t_schedule]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("schedule must be strictly increasing")
    values = [float(estimator(t)) for t in ts]
    converged = False
    if len(values) > convergence_window:
        diffs = [
            abs(b - a) / max(abs(b), 1e-30) for a, b in zip(values, values[1:])
        ]
        converged = all(d < rtol for d in diffs[-convergence_window:])
    extrap = None
    if extrapolate and len(values) >= 2:
        t1, t2 = ts[-2], ts[-1]
        v1, v2 = values[-2], values[-1]
        extrap = (v2 / t1 - v1 / t2) / (1.0 / t1 - 1.0 / t2)
    return EstimatorRun(
        t_schedule=ts, values=values, converged=converged, extrapolated=extrap
    )
