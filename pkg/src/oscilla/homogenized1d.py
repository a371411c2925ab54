"""The homogenized problem -r w0'' + w0 = f on (0, 1), w0'(0) = w0'(1) = 0."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .geometry import SourceFunction, _check_unit_interval

# 3-point Gauss-Legendre rule on [0, 1]
_GAUSS_X = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class HomogenizedSolution:
    """w0 either as a cosine series (``spectral``) or as P1 nodal values (``fem1d``)."""

    kind: str
    r: float
    source: object
    coefficients: np.ndarray = None
    grid: np.ndarray = None
    values: np.ndarray = None

    def derivatives(self, x):
        return eval_w0_derivs(self, x)

    def __call__(self, x):
        return eval_w0_derivs(self, x)[0]


def solve_w0(source, r, method=None, elements=256):
    """Solve the homogenized equation.

    ``method`` defaults to ``"spectral"`` for cosine sources and to ``"fem1d"``
    otherwise. The fem1d system is tridiagonal and solved directly.
    """
    if not r > 0:
        raise ValueError(f"homogenized coefficient must be positive, got {r}")
    if method is None:
        method = "spectral" if isinstance(source, SourceFunction) else "fem1d"
    if method == "spectral":
        if not isinstance(source, SourceFunction):
            raise TypeError("the spectral path needs a cosine-polynomial source")
        k = source.wavenumbers
        d = np.asarray(source.coefficients) / (1.0 + r * k**2)
        return HomogenizedSolution("spectral", float(r), source, coefficients=d)
    if method == "fem1d":
        return _solve_fem1d(source, r, elements)
    raise ValueError(f"unknown method {method!r}")


def _solve_fem1d(source, r, N):
    if N < 1:
        raise ValueError("need at least one element")
    h = 1.0 / N
    x = np.linspace(0.0, 1.0, N + 1)
    e = np.arange(N)
    diag, off = r / h + h / 3.0, -r / h + h / 6.0
    bands = np.zeros((3, N + 1))
    bands[0, 1:] = off
    bands[1, :] = 2.0 * diag
    bands[1, [0, -1]] = diag
    bands[2, :-1] = off
    q = x[:-1, None] + h * _GAUSS_X[None, :]
    fq = source.value(q) * (h * _GAUSS_W)
    t = _GAUSS_X[None, :]
    load = np.zeros(N + 1)
    np.add.at(load, e, np.sum(fq * (1.0 - t), axis=1))
    np.add.at(load, e + 1, np.sum(fq * t, axis=1))
    u = solve_banded((1, 1), bands, load)
    return HomogenizedSolution("fem1d", float(r), source, grid=x, values=u)


def eval_w0_derivs(sol, x):
    """Return ``(w0, w0', w0'', w0''', w0'''')`` at ``x``.

    The fem1d path takes w0' from the element slope and recovers the higher
    derivatives from the equation itself: w0'' = (w0 - f)/r and so on.
    """
    x = _check_unit_interval(x)
    if sol.kind == "spectral":
        k = sol.source.wavenumbers
        kx = np.multiply.outer(x, k)
        d = sol.coefficients
        return tuple(np.cos(kx + n * np.pi / 2) @ (d * k**n) for n in range(5))
    grid, u = sol.grid, sol.values
    N = len(grid) - 1
    w0 = np.interp(x, grid, u)
    e = np.clip(np.floor(x * N).astype(np.int64), 0, N - 1)
    dw0 = (u[e + 1] - u[e]) * N
    f = sol.source.value(x)
    df = sol.source.derivative(x, 1)
    d2f = sol.source.derivative(x, 2)
    r = sol.r
    d2 = (w0 - f) / r
    d3 = (dw0 - df) / r
    d4 = (d2 - d2f) / r
    return w0, dw0, d2, d3, d4


def compute_fhat_f0(profile, eps, source):
    """Return ``(fhat, f0)``: the vertically averaged source and its weak limit.

    For sources depending on x1 only, fhat(x1) = g(x1/eps) f(x1) and the weak
    limit of fhat is (mean g) f, hence f0 = f.
    """
    def fhat(x1):
        x1 = np.asarray(x1, dtype=float)
        return profile.g(x1 / eps) * source.value(x1)

    return fhat, source


def homogenized_forms(sol, mean_g):
    """Closures for the weighted forms a0(u, v) and (u, v)_0 on (0, 1).

    Both take callables returning ``(value, derivative)`` and integrate with
    composite Gauss quadrature on 2048 cells.
    """
    cells = 2048
    xq = ((np.arange(cells)[:, None] + _GAUSS_X[None, :]) / cells).ravel()
    wq = np.tile(_GAUSS_W / cells, cells)

    def a0(u, v):
        (u0, u1), (v0, v1) = u(xq), v(xq)
        return mean_g * np.sum(wq * (sol.r * u1 * v1 + u0 * v0))

    def inner0(u, v):
        return mean_g * np.sum(wq * u(xq)[0] * v(xq)[0])

    return a0, inner0
