"""Probability measures on the real line with support bounded from below.

A measure is a finite mixture of point masses and density components drawn
from three analytically classifiable families (piecewise polynomial,
exponential tail, power edge).  Restricting to these families keeps the
behaviour of the density at the bottom edge of the support decidable in
closed form, which the singularity classification relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1, gammainc, gammaln

MASS_TOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _gauss_legendre(f, a: float, b: float) -> float:
    """64-node Gauss-Legendre quadrature of ``f`` over ``[a, b]``."""
    x = 0.5 * (b - a) * _GL_NODES + 0.5 * (b + a)
    return 0.5 * (b - a) * float(np.sum(_GL_WEIGHTS * f(x)))


def _log_gamma_moment(order: float, t: float, length: float) -> float:
    """log of ``int_0^length u^order * exp(-t*u) du`` for ``t > 0``."""
    # Gamma(order+1) * t^-(order+1) * P(order+1, t*length), all in log domain.
    p = gammainc(order + 1.0, t * length)
    if p <= 0.0:
        # t*length so small the regularized gamma underflows; fall back to
        # the t->0 monomial integral.
        return (order + 1.0) * math.log(length) - math.log(order + 1.0)
    return gammaln(order + 1.0) - (order + 1.0) * math.log(t) + math.log(p)


class MeasureError(ValueError):
    """Raised for invalid measure definitions or unclassifiable edges."""


@dataclass(frozen=True)
class AtomComponent:
    """Point mass at ``location`` carrying ``mass``."""

    location: float
    mass: float

    def __post_init__(self):
        if not self.mass > 0:
            raise MeasureError(f"atom mass must be positive, got {self.mass}")
        if not math.isfinite(self.location):
            raise MeasureError("atom location must be finite")


@dataclass(frozen=True)
class DensityComponent:
    """Base class for absolutely continuous mixture components.

    Subclasses provide ``support_min``, exponential moments and the closed
    form edge classification used by the inverse-moment oracle.
    """

    weight: float

    def __post_init__(self):
        if not 0 < self.weight <= 1 + MASS_TOL:
            raise MeasureError(f"weight must lie in (0, 1], got {self.weight}")

    @property
    def support_min(self) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        """First moment of the component (including its weight)."""
        raise NotImplementedError

    def exp_moments(self, t: float, shift: float) -> tuple[float, float, float]:
        """Tilted moments ``(log I0, m1, v)`` at tilt ``t`` about ``shift``.

        ``I0 = w * int exp(-t(x-shift)) f(x) dx`` for normalized density
        ``f``; ``m1`` and ``v`` are the mean and variance of ``x`` under the
        tilted (renormalized) component.
        """
        raise NotImplementedError

    def inverse_moment(self, edge: float) -> float:
        """``w * int (x-edge)^-1 f(x) dx`` for ``edge <= support_min``.

        Returns ``math.inf`` when the integral diverges at the edge.
        """
        raise NotImplementedError

    def stieltjes(self, z: complex) -> complex:
        """``w * int (x-z)^-1 f(x) dx`` for ``Re(z) < support_min``."""
        raise NotImplementedError

    def translated(self, shift: float) -> "DensityComponent":
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewisePolynomial(DensityComponent):
    """Density proportional to ``sum_k coeffs[k] * (x-a)^k`` on ``[a, b]``."""

    a: float = 0.0
    b: float = 1.0
    coeffs: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        super().__post_init__()
        if not self.b > self.a:
            raise MeasureError("piecewise polynomial needs b > a")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        u = np.linspace(0.0, self.b - self.a, 257)
        if np.any(np.polynomial.polynomial.polyval(u, self.coeffs) < -1e-12):
            raise MeasureError("polynomial density is negative on its support")

    @property
    def support_min(self) -> float:
        return self.a

    @property
    def _norm(self) -> float:
        L = self.b - self.a
        return sum(c * L ** (k + 1) / (k + 1) for k, c in enumerate(self.coeffs))

    def _tilted_sums(self, t: float) -> tuple[float, float, float, float]:
        """Return (log scale, S1/S0, S2/S0, S0ref) for u-moments under e^{-tu}."""
        L = self.b - self.a
        if t <= 0.0:
            logm = [
                (k + 1.0) * math.log(L) - math.log(k + 1.0)
                for k in range(len(self.coeffs) + 2)
            ]
        else:
            logm = [
                _log_gamma_moment(float(k), t, L)
                for k in range(len(self.coeffs) + 2)
            ]
        ref = max(
            logm[k] for k, c in enumerate(self.coeffs) if c != 0.0
        )
        s0 = sum(c * math.exp(logm[k] - ref) for k, c in enumerate(self.coeffs))
        s1 = sum(c * math.exp(logm[k + 1] - ref) for k, c in enumerate(self.coeffs))
        s2 = sum(c * math.exp(logm[k + 2] - ref) for k, c in enumerate(self.coeffs))
        return ref, s1 / s0, s2 / s0, s0

    def mean(self) -> float:
        _, m1u, _, _ = self._tilted_sums(0.0)
        return self.weight * (self.a + m1u)

    def exp_moments(self, t: float, shift: float) -> tuple[float, float, float]:
        ref, m1u, m2u, s0 = self._tilted_sums(t)
        log_i0 = (
            math.log(self.weight)
            - math.log(self._norm)
            - t * (self.a - shift)
            + ref
            + math.log(s0)
        )
        var = m2u - m1u * m1u
        return log_i0, self.a + m1u, max(var, 0.0)

    def inverse_moment(self, edge: float) -> float:
        d = self.a - edge
        scale = self.weight / self._norm
        if d > 0:
            return scale * _gauss_legendre(
                lambda u: np.polynomial.polynomial.polyval(u, self.coeffs) / (u + d),
                0.0,
                self.b - self.a,
            )
        if self.coeffs[0] != 0.0:
            return math.inf
        # constant term vanishes: p(u)/u is again a polynomial
        reduced = self.coeffs[1:]
        return scale * _gauss_legendre(
            lambda u: np.polynomial.polynomial.polyval(u, reduced),
            0.0,
            self.b - self.a,
        )

    def stieltjes(self, z: complex) -> complex:
        scale = self.weight / self._norm
        x = 0.5 * (self.b - self.a) * _GL_NODES + 0.5 * (self.b + self.a)
        vals = np.polynomial.polynomial.polyval(x - self.a, self.coeffs) / (x - z)
        return scale * 0.5 * (self.b - self.a) * complex(np.sum(_GL_WEIGHTS * vals))

    def translated(self, shift: float) -> "PiecewisePolynomial":
        return PiecewisePolynomial(
            weight=self.weight, a=self.a + shift, b=self.b + shift, coeffs=self.coeffs
        )


@dataclass(frozen=True)
class ExponentialTail(DensityComponent):
    """Density ``rate * exp(-rate*(x-a))`` on ``[a, inf)``."""

    a: float = 0.0
    rate: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.rate > 0:
            raise MeasureError("exponential tail needs rate > 0")

    @property
    def support_min(self) -> float:
        return self.a

    def mean(self) -> float:
        return self.weight * (self.a + 1.0 / self.rate)

    def exp_moments(self, t: float, shift: float) -> tuple[float, float, float]:
        r = self.rate + t
        log_i0 = math.log(self.weight) - t * (self.a - shift) + math.log(self.rate / r)
        return log_i0, self.a + 1.0 / r, 1.0 / (r * r)

    def inverse_moment(self, edge: float) -> float:
        d = self.a - edge
        if d <= 0:
            return math.inf
        x = self.rate * d
        # int_0^inf rate*e^{-rate*u}/(u+d) du = rate * e^{x} E1(x)
        if x > 700.0:
            return self.weight / d  # e^x E1(x) ~ 1/x
        return self.weight * self.rate * math.exp(x) * float(exp1(x))

    def stieltjes(self, z: complex) -> complex:
        x = self.rate * (self.a - z)
        return self.weight * self.rate * complex(np.exp(x) * exp1(x))

    def translated(self, shift: float) -> "ExponentialTail":
        return ExponentialTail(weight=self.weight, a=self.a + shift, rate=self.rate)


@dataclass(frozen=True)
class PowerEdge(DensityComponent):
    """Density proportional to ``(x-a)^p`` on ``[a, b]`` with ``p > -1``."""

    a: float = 0.0
    b: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        super().__post_init__()
        if not self.b > self.a:
            raise MeasureError("power edge needs b > a")
        if not self.p > -1:
            raise MeasureError("power edge needs exponent > -1")

    @property
    def support_min(self) -> float:
        return self.a

    def mean(self) -> float:
        L = self.b - self.a
        return self.weight * (self.a + L * (self.p + 1.0) / (self.p + 2.0))

    def exp_moments(self, t: float, shift: float) -> tuple[float, float, float]:
        L = self.b - self.a
        if t <= 0.0:
            logm = [
                (self.p + k + 1.0) * math.log(L) - math.log(self.p + k + 1.0)
                for k in range(3)
            ]
        else:
            logm = [_log_gamma_moment(self.p + k, t, L) for k in range(3)]
        m1u = math.exp(logm[1] - logm[0])
        m2u = math.exp(logm[2] - logm[0])
        log_norm = (self.p + 1.0) * math.log(L) - math.log(self.p + 1.0)
        log_i0 = math.log(self.weight) - t * (self.a - shift) + logm[0] - log_norm
        return log_i0, self.a + m1u, max(m2u - m1u * m1u, 0.0)

    def inverse_moment(self, edge: float) -> float:
        d = self.a - edge
        L = self.b - self.a
        norm = L ** (self.p + 1.0) / (self.p + 1.0)
        if d > 0:
            return (self.weight / norm) * _gauss_legendre(
                lambda u: u**self.p / (u + d), 0.0, L
            )
        if self.p <= 0:
            return math.inf
        return self.weight * (self.p + 1.0) / (self.p * L)

    def stieltjes(self, z: complex) -> complex:
        L = self.b - self.a
        # substitution u = L*v^(1/(p+1)) absorbs the u^p edge weight exactly
        v = 0.5 * (_GL_NODES + 1.0)
        u = L * v ** (1.0 / (self.p + 1.0))
        vals = 1.0 / (self.a + u - z)
        return self.weight * 0.5 * complex(np.sum(_GL_WEIGHTS * vals))

    def translated(self, shift: float) -> "PowerEdge":
        return PowerEdge(
            weight=self.weight, a=self.a + shift, b=self.b + shift, p=self.p
        )


@dataclass(frozen=True)
class ProbabilityMeasure:
    """Mixture of atoms and density components with total mass one."""

    atoms: tuple[AtomComponent, ...] = ()
    densities: tuple[DensityComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "densities", tuple(self.densities))
        if not self.atoms and not self.densities:
            raise MeasureError("measure needs at least one component")
        total = sum(a.mass for a in self.atoms) + sum(
            d.weight for d in self.densities
        )
        if abs(total - 1.0) > MASS_TOL:
            raise MeasureError(f"total mass {total} != 1 beyond {MASS_TOL}")
        locs = [a.location for a in self.atoms]
        if len(set(locs)) != len(locs):
            raise MeasureError("atom locations must be pairwise distinct")


def infimum_support(measure: ProbabilityMeasure) -> float:
    """Infimum of the support; exact (no quadrature)."""
    infs = [a.location for a in measure.atoms]
    infs += [d.support_min for d in measure.densities]
    return min(infs)


def mean(measure: ProbabilityMeasure) -> float:
    """First moment of the measure."""
    m = sum(a.mass * a.location for a in measure.atoms)
    m += sum(d.mean() for d in measure.densities)
    return m


def inverse_moment_oracle(measure: ProbabilityMeasure) -> float:
    """``int_(E,inf) (x-E)^-1 dmu`` excluding any atom at ``E``.

    Returns ``math.inf`` when a component makes the integral divergent;
    divergence is decided from the component family, never by quadrature
    near the singularity.
    """
    E = infimum_support(measure)
    total = 0.0
    for a in measure.atoms:
        if a.location > E:
            total += a.mass / (a.location - E)
    for d in measure.densities:
        v = d.inverse_moment(E)
        if math.isinf(v):
            return math.inf
        total += v
    return total


def stieltjes_transform(measure: ProbabilityMeasure, z: complex) -> complex:
    """``int (x-z)^-1 dmu`` for ``Re(z) < inf supp``."""
    E = infimum_support(measure)
    if complex(z).real >= E:
        raise MeasureError(f"Stieltjes transform needs Re(z) < {E}")
    total = 0j
    for a in measure.atoms:
        total += a.mass / (a.location - z)
    for d in measure.densities:
        total += d.stieltjes(z)
    return total


def translate(measure: ProbabilityMeasure, shift: float) -> ProbabilityMeasure:
    """Shift every component location by ``shift``; exact."""
    return ProbabilityMeasure(
        atoms=tuple(
            AtomComponent(location=a.location + shift, mass=a.mass)
            for a in measure.atoms
        ),
        densities=tuple(d.translated(shift) for d in measure.densities),
    )


def atom_mass_at(measure: ProbabilityMeasure, x: float) -> float:
    """Mass of the atom at ``x`` (0 when there is none)."""
    for a in measure.atoms:
        if a.location == x:
            return a.mass
    return 0.0


def quadrature_nodes(component: DensityComponent, n: int = 64):
    """Nodes/weights integrating ``f`` against the weighted component.

    ``sum(w * f(x))`` approximates ``weight * int f dcomp``; the rule is
    exact for polynomials of the matching degree and absorbs the edge
    singularity of power-edge components by substitution.
    """
    if isinstance(component, PiecewisePolynomial):
        nodes, wts = np.polynomial.legendre.leggauss(n)
        L = component.b - component.a
        x = component.a + 0.5 * L * (nodes + 1.0)
        dens = np.polynomial.polynomial.polyval(x - component.a, component.coeffs)
        w = 0.5 * L * wts * dens * component.weight / component._norm
        return x, w
    if isinstance(component, PowerEdge):
        # u = L * v^(1/(p+1)) turns the edge weight into Lebesgue measure
        nodes, wts = np.polynomial.legendre.leggauss(n)
        L = component.b - component.a
        v = 0.5 * (nodes + 1.0)
        x = component.a + L * v ** (1.0 / (component.p + 1.0))
        w = 0.5 * wts * component.weight
        return x, w
    if isinstance(component, ExponentialTail):
        nodes, wts = np.polynomial.laguerre.laggauss(n)
        x = component.a + nodes / component.rate
        w = wts * component.weight
        return x, w
    raise MeasureError(f"no quadrature rule for {type(component).__name__}")


# ---------------------------------------------------------------------------
# fixture constructors used across tests and docs


def dirac(location: float = 0.0) -> ProbabilityMeasure:
    return ProbabilityMeasure(atoms=(AtomComponent(location, 1.0),))


def two_atoms(rho: float = 0.5, gap: float = 1.0, base: float = 0.0) -> ProbabilityMeasure:
    """``rho * delta_base + (1-rho) * delta_(base+gap)``."""
    return ProbabilityMeasure(
        atoms=(
            AtomComponent(base, rho),
            AtomComponent(base + gap, 1.0 - rho),
        )
    )


def uniform(a: float, b: float, weight: float = 1.0) -> PiecewisePolynomial:
    return PiecewisePolynomial(weight=weight, a=a, b=b, coeffs=(1.0,))


def exponential(rate: float = 1.0, a: float = 0.0, weight: float = 1.0) -> ExponentialTail:
    return ExponentialTail(weight=weight, a=a, rate=rate)
