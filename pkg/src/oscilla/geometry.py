"""Periodic boundary profiles, analytic sources and the macro-to-cell map."""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DomainError

# relative slack for points sitting on the oscillating boundary
BOUNDARY_SLACK = 1e-9


@dataclass(frozen=True)
class PeriodicProfile:
    """L-periodic height function g(y) = a0 + sum_k a_k cos(2 pi k y / L).

    ``family`` is derived from the coefficients: ``"constant"`` when every
    cosine amplitude vanishes, ``"cosine"`` for a single harmonic and
    ``"cosine_series"`` otherwise.
    """

    a0: float
    amplitudes: tuple = ()
    period: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "period", float(self.period))
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive, got {self.period}")
        if not all(math.isfinite(a) for a in (self.a0,) + self.amplitudes):
            raise ValueError("profile coefficients must be finite")
        if self.a0 <= sum(abs(a) for a in self.amplitudes):
            raise ValueError(
                "profile must stay positive: need a0 > sum |a_k| "
                f"(a0={self.a0}, amplitudes={self.amplitudes})"
            )
        y = np.linspace(0.0, self.period, 10_001)
        if not np.min(self.g(y)) > 0:
            raise ValueError("profile is not strictly positive on [0, L]")

    @classmethod
    def constant(cls, height=1.0, period=1.0):
        return cls(height, (), period)

    @property
    def family(self):
        nonzero = [a for a in self.amplitudes if a != 0.0]
        if not nonzero:
            return "constant"
        if len(self.amplitudes) == 1:
            return "cosine"
        return "cosine_series"

    @property
    def mean(self):
        """The average of g over one period (closed form: a0)."""
        return self.a0

    def _phases(self, y):
        y = np.asarray(y, dtype=float)
        k = np.arange(1, len(self.amplitudes) + 1, dtype=float)
        return 2.0 * np.pi * np.multiply.outer(y, k) / self.period, k

    def g(self, y):
        if not self.amplitudes:
            return np.full_like(np.asarray(y, dtype=float), self.a0)
        phase, _ = self._phases(y)
        return self.a0 + np.cos(phase) @ np.asarray(self.amplitudes)

    def dg(self, y):
        if not self.amplitudes:
            return np.zeros_like(np.asarray(y, dtype=float))
        phase, k = self._phases(y)
        w = -2.0 * np.pi * k / self.period * np.asarray(self.amplitudes)
        return np.sin(phase) @ w

    def min_height(self):
        return self.a0 - sum(abs(a) for a in self.amplitudes)

    def describe(self):
        amps = ", ".join(repr(a) for a in self.amplitudes)
        return f"cosine({self.a0!r}, [{amps}], {self.period!r})"


@dataclass(frozen=True)
class SourceFunction:
    """Cosine polynomial f(x) = sum_k c_k cos(k pi x) on [0, 1].

    Every term already satisfies f'(0) = f'(1) = 0.
    """

    coefficients: tuple = field(default=(1.0,))

    MAX_TERMS = 64

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("source needs at least one coefficient")
        if len(coeffs) > self.MAX_TERMS:
            raise ValueError(f"at most {self.MAX_TERMS} cosine terms are supported")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("source coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def wavenumbers(self):
        return np.pi * np.arange(len(self.coefficients), dtype=float)

    def _basis(self, x):
        return np.multiply.outer(np.asarray(x, dtype=float), self.wavenumbers)

    def value(self, x):
        return np.cos(self._basis(x)) @ np.asarray(self.coefficients)

    def derivative(self, x, order=1):
        """Closed-form derivative of any order."""
        kx = self._basis(x)
        c = np.asarray(self.coefficients) * self.wavenumbers**order
        # d^n/dx^n cos(kx) = k^n cos(kx + n pi / 2)
        return np.cos(kx + order * np.pi / 2) @ c

    def is_constant(self):
        return all(c == 0.0 for c in self.coefficients[1:])

    def describe(self):
        return "cospoly([" + ", ".join(repr(c) for c in self.coefficients) + "])"


def eval_profile(profile, y):
    """Return ``(g(y), g'(y), mean of g)``."""
    return profile.g(y), profile.dg(y), profile.mean


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
        raise DomainError("source coordinates must lie in [0, 1]")
    return x


def eval_source(source, x):
    """Return ``(f(x), f'(x), f''(x))``; ``x`` must lie in [0, 1]."""
    x = _check_unit_interval(x)
    return source.value(x), source.derivative(x, 1), source.derivative(x, 2)


def reduce_periodic(y, period):
    """Reduce ``y`` into ``[0, period)`` with a single wrap correction."""
    y = np.asarray(y, dtype=float)
    r = y - np.floor(y / period) * period
    # floating point can round r up to exactly ``period``
    r = np.where(r >= period, r - period, r)
    return np.where(r < 0.0, 0.0, r)


def map_to_cell(eps, period, x1, x2, profile=None):
    """Map thin-domain points ``(x1, x2)`` to cell coordinates ``(y, z)``.

    When ``profile`` is given the points are checked against the thin domain
    0 <= x1 <= 1, 0 <= x2 <= eps g(x1/eps) with a relative slack.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    tol = 1e-12
    if np.any(x1 < -tol) or np.any(x1 > 1.0 + tol) or np.any(x2 < -tol * eps):
        raise DomainError("point lies outside the thin domain")
    z = x2 / eps
    y = reduce_periodic(x1 / eps, period)
    if profile is not None:
        top = profile.g(y)
        if np.any(z > top * (1.0 + BOUNDARY_SLACK)):
            raise DomainError("point lies above the oscillating boundary")
    return y, z


class TabulatedSource:
    """Source sampled on a uniform grid of [0, 1], interpolated by a cubic spline.

    The spline uses clamped (zero-slope) end conditions so that the homogenized
    Neumann data are respected.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or len(values) < 4 or not np.all(np.isfinite(values)):
            raise ValueError("need at least 4 finite samples")
        self.values = values
        self._spline = CubicSpline(np.linspace(0.0, 1.0, len(values)), values,
                                   bc_type="clamped")

    @classmethod
    def from_function(cls, func, samples=257):
        return cls(func(np.linspace(0.0, 1.0, samples)))

    def value(self, x):
        return self._spline(np.asarray(x, dtype=float))

    def derivative(self, x, order=1):
        return self._spline(np.asarray(x, dtype=float), order)

    def is_constant(self):
        return bool(np.all(self.values == self.values[0]))

    def describe(self):
        return f"tabulated({len(self.values)} samples)"
