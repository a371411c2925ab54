"""First- and second-order truncations built from the cell solutions.

W1(x) = w0(x1) - eps X(x/eps) w0'(x1)
W2(x) = W1(x) + eps^2 theta(x/eps) w0''(x1)
"""
from dataclasses import dataclass

import numpy as np

from .fem2d import MIDPOINT_BARY
from .geometry import map_to_cell
from .mesh import check_alignment, locate_point


@dataclass(frozen=True)
class TruncationField:
    order: int
    cell: object
    w0: object
    profile: object
    eps: float

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("truncation order must be 1 or 2")
        if self.order == 2 and self.cell.theta is None:
            raise ValueError("order 2 needs the theta cell solution")


def _cell_samples(field, x1, x2):
    """Cell values and gradients of X and theta at thin-domain points."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    # the height check happens in locate_point, which also admits points under
    # the polygonal top where it lies above g
    y, z = map_to_cell(field.eps, field.profile.period, x1, x2)
    tri, bary = locate_point(field.cell.mesh, y, z, profile=field.profile)
    nodes = field.cell.mesh.triangles[tri]
    X = np.sum(bary * field.cell.X[nodes], axis=1)
    T = np.sum(bary * field.cell.theta[nodes], axis=1)
    gX, gT = field.cell.gradients()
    return x1, X, T, gX[tri], gT[tri]


def _combine(order, eps, derivs, X, T, gX, gT):
    w0, d1, d2, d3, _ = derivs
    value = w0 - eps * X * d1
    dx1 = d1 - gX[..., 0] * d1 - eps * X * d2
    dx2 = -gX[..., 1] * d1
    if order == 2:
        value = value + eps**2 * T * d2
        dx1 = dx1 + eps * gT[..., 0] * d2 + eps**2 * T * d3
        dx2 = dx2 + eps * gT[..., 1] * d2
    return value, np.stack([dx1, dx2], axis=-1)


def eval_truncation(field, x1, x2):
    """Value of W1 or W2 at thin-domain points."""
    x1, X, T, gX, gT = _cell_samples(field, x1, x2)
    value, _ = _combine(field.order, field.eps, field.w0.derivatives(np.clip(x1, 0, 1)),
                        X, T, gX, gT)
    return value


def grad_truncation(field, x1, x2):
    """Gradient ``(..., 2)`` of W1 or W2; exact inside each cell triangle image."""
    x1, X, T, gX, gT = _cell_samples(field, x1, x2)
    _, grad = _combine(field.order, field.eps, field.w0.derivatives(np.clip(x1, 0, 1)),
                       X, T, gX, gT)
    return grad


def corrector_terms(field, x1, x2):
    """Return ``(kappa, mu)``: the first- and second-order corrector values."""
    x1, X, T, _, _ = _cell_samples(field, x1, x2)
    w0, d1, d2, _, _ = field.w0.derivatives(np.clip(x1, 0, 1))
    kappa = -field.eps * X * d1
    mu = kappa + field.eps**2 * T * d2
    return kappa, mu


def truncation_on_mesh(field, thin):
    """W values ``(T, 3)`` and gradients ``(T, 3, 2)`` at the thin-mesh quadrature points.

    Every thin triangle is the scaled image of a known cell triangle, so X
    and theta are sampled there exactly, with the gradient of that very
    triangle even when a quadrature point lies on a shared edge.
    """
    check_alignment(thin, field.cell.mesh, field.profile)
    ctri = thin.cell_triangle_of(np.arange(thin.n_triangles))
    cmesh = field.cell.mesh
    gX, gT = field.cell.gradients()
    X = field.cell.X[cmesh.triangles[ctri]] @ MIDPOINT_BARY.T
    T = field.cell.theta[cmesh.triangles[ctri]] @ MIDPOINT_BARY.T
    pts = np.einsum("qi,tik->tqk", MIDPOINT_BARY, thin.nodes[thin.triangles])
    x1 = np.clip(pts[..., 0], 0.0, 1.0)
    derivs = field.w0.derivatives(x1)
    return _combine(field.order, field.eps, derivs, X, T,
                    gX[ctri][:, None, :], gT[ctri][:, None, :])


def w0_on_mesh(w0, thin):
    """w0 values ``(T, 3)`` and gradients ``(T, 3, 2)`` at quadrature points."""
    pts = np.einsum("qi,tik->tqk", MIDPOINT_BARY, thin.nodes[thin.triangles])
    v, d1, *_ = w0.derivatives(np.clip(pts[..., 0], 0.0, 1.0))
    return v, np.stack([d1, np.zeros_like(d1)], axis=-1)
