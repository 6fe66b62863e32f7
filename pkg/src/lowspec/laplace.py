"""Log-domain Laplace transform of a measure and tilted-measure statistics.

All quotients of transform values are assembled in the log domain; values
are exponentiated only at API boundaries.  Internally every density
integral is taken against ``exp(-t*(x-E))`` and corrected by ``-t*E``
afterwards, so nothing underflows for large ``t``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .measures import ProbabilityMeasure, infimum_support, mean as measure_mean


@dataclass(frozen=True)
class TiltedStats:
    """Mean and variance of the measure reweighted by ``exp(-t*x)``."""

    t: float
    mean: float
    var: float


class LaplaceEvaluator:
    """Cached evaluator of ``log Z(t)`` and tilted statistics.

    Logically immutable; the cache is an internal optimization with
    idempotent writes, safe under concurrent fills.
    """

    def __init__(self, measure: ProbabilityMeasure):
        self.measure = measure
        self.E = infimum_support(measure)
        self.m = measure_mean(measure)
        self._cache: dict[float, float] = {}
        self._lock = threading.Lock()

    # -- core -------------------------------------------------------------

    def _component_moments(self, t: float):
        """Per-component (log I0, mean, var) relative to the shift E."""
        out = []
        for a in self.measure.atoms:
            out.append((math.log(a.mass) - t * (a.location - self.E), a.location, 0.0))
        for d in self.measure.densities:
            out.append(d.exp_moments(t, self.E))
        return out

    def log_Z(self, t: float) -> float:
        """``log int exp(-t*x) dmu`` for ``t >= 0``."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        t = float(t)
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        logs = np.array([c[0] for c in self._component_moments(t)])
        ref = logs.max()
        val = ref + math.log(float(np.sum(np.exp(logs - ref)))) - t * self.E
        with self._lock:
            self._cache[t] = val
        return val

    def log_Z_many(self, ts: np.ndarray) -> np.ndarray:
        return np.array([self.log_Z(t) for t in np.asarray(ts, dtype=float)])

    def infsupp_estimate(self, t: float) -> float:
        """``-log Z(t) / t``; decreases to ``E`` as ``t`` grows."""
        if t <= 0:
            raise ValueError("t must be positive")
        return -self.log_Z(t) / t

    def tilted_stats(self, t: float) -> TiltedStats:
        """Mean/variance of the tilted measure; two-pass variance."""
        comps = self._component_moments(float(t))
        logs = np.array([c[0] for c in comps])
        means = np.array([c[1] for c in comps])
        varis = np.array([c[2] for c in comps])
        ref = logs.max()
        w = np.exp(logs - ref)
        w /= w.sum()
        m = float(np.dot(w, means))
        v = float(np.dot(w, varis + (means - m) ** 2))
        if v < 0:
            if v < -1e-12:
                raise ArithmeticError(f"negative tilted variance {v}")
            v = 0.0
        return TiltedStats(t=float(t), mean=m, var=v)

    def log_quotient(self, s: float, t: float) -> float:
        """``log( Z(s) Z(t-s) / Z(t) )`` for ``0 <= s <= t``; always <= 0."""
        if not 0 <= s <= t:
            raise ValueError("need 0 <= s <= t")
        if s == 0.0 or s == t:
            return 0.0
        return min(0.0, self.log_Z(s) + self.log_Z(t - s) - self.log_Z(t))
