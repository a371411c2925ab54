"""Periodic cell problems for X and theta and the homogenized coefficient r."""
from dataclasses import dataclass, field
import logging

import numpy as np

from .exceptions import CompatibilityError
from .fem2d import (
    apply_periodic,
    assemble_system,
    assemble_upper_boundary_load,
    shape_gradients,
)
from .mesh import build_cell_mesh
from .sparse_linalg import cg_solve_singular

log = logging.getLogger(__name__)

CELL_TOL = 1e-10
THETA_COMPAT_LIMIT = 1e-8


def _mean_zero(u):
    return u - np.mean(u)


@dataclass
class CellSolutions:
    """Nodal X and theta on the cell mesh plus the homogenized coefficient."""

    mesh: object
    pairing: object
    X: np.ndarray
    theta: np.ndarray
    r: float
    area: float
    diagnostics: dict = field(default_factory=dict)

    def gradients(self):
        """Constant per-triangle gradients of X and theta, each ``(T, 2)``."""
        _, grads = shape_gradients(self.mesh)
        tri = self.mesh.triangles
        gX = np.einsum("ti,tik->tk", self.X[tri], grads)
        gT = np.einsum("ti,tik->tk", self.theta[tri], grads)
        return gX, gT


def solve_X(mesh, pairing, tol=CELL_TOL, K=None):
    """Solve the X problem; return ``(X nodal, info)``.

    ``info`` holds the condensed load sum, the Galerkin identity gap and the
    solver report.
    """
    K = assemble_system(mesh)[0] if K is None else K
    b = assemble_upper_boundary_load(mesh)
    Kc, bc, cond = apply_periodic(K, b, pairing)
    if not np.any(bc):
        X = np.zeros(mesh.n_nodes)
        report = None
    else:
        xc, report = cg_solve_singular(Kc, bc, tol=tol)
        X = _mean_zero(cond.expand(xc))
    # energy and load evaluated on the full nodal field
    energy = float(X @ K.spmv(X))
    work = float(b @ X)
    info = {
        "load_sum": float(np.sum(bc)),
        "galerkin_gap": abs(energy - work) / abs(work) if work else abs(energy),
        "report": report,
    }
    return X, info


def compute_r(mesh, X, K=None):
    """Return ``(r_flux, r_energy, gap)`` for a solved X field."""
    K = assemble_system(mesh)[0] if K is None else K
    area, grads = shape_gradients(mesh)
    dyX = np.einsum("ti,ti->t", X[mesh.triangles], grads[:, :, 0])
    cell_area = float(np.sum(area))
    int_dyX = float(np.sum(area * dyX))
    r_flux = (cell_area - int_dyX) / cell_area
    r_energy = (cell_area - 2.0 * int_dyX + float(X @ K.spmv(X))) / cell_area
    return r_flux, r_energy, abs(r_flux - r_energy)


def theta_load(mesh, X, r):
    """Weak right side of the theta problem and its compatibility residual.

    b_i = int X d_y(phi_i) + int (1 - r - d_y X) phi_i.
    """
    area, grads = shape_gradients(mesh)
    tri = mesh.triangles
    Xloc = X[tri]
    dyX = np.einsum("ti,ti->t", Xloc, grads[:, :, 0])
    mean_X = Xloc.mean(axis=1)  # exact integral of P1 X over a triangle / area
    flux_part = (area * mean_X)[:, None] * grads[:, :, 0]
    src = 1.0 - r - dyX
    source_part = (area * src / 3.0)[:, None] * np.ones(3)
    local = flux_part + source_part
    b = np.bincount(tri.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)
    residual = float(np.sum(area * src))
    return b, residual


def solve_theta(mesh, pairing, X, r, tol=CELL_TOL, K=None):
    """Solve the theta problem; return ``(theta nodal, info)``.

    Raises :class:`CompatibilityError` if the right side does not integrate
    to zero (up to 1e-8 |Y*|).
    """
    K = assemble_system(mesh)[0] if K is None else K
    b, residual = theta_load(mesh, X, r)
    cell_area = mesh.area
    if abs(residual) > THETA_COMPAT_LIMIT * cell_area:
        raise CompatibilityError(
            f"theta right side integrates to {residual:.3e}, not zero; is r consistent with X?"
        )
    Kc, bc, cond = apply_periodic(K, b, pairing)
    if np.max(np.abs(bc), initial=0.0) == 0.0:
        return np.zeros(mesh.n_nodes), {"compatibility_residual": residual, "report": None}
    tc, report = cg_solve_singular(Kc, bc, tol=tol)
    theta = _mean_zero(cond.expand(tc))
    return theta, {"compatibility_residual": residual, "report": report}


def solve_cell(profile, m, n, tol=CELL_TOL):
    """Mesh the cell, solve for X, r and theta, and collect diagnostics."""
    mesh, pairing = build_cell_mesh(profile, m, n)
    K = assemble_system(mesh)[0]
    X, xinfo = solve_X(mesh, pairing, tol=tol, K=K)
    r_flux, r_energy, gap = compute_r(mesh, X, K=K)
    theta, tinfo = solve_theta(mesh, pairing, X, r_flux, tol=tol, K=K)
    report = lambda rep: rep.as_dict() if rep is not None else None
    diagnostics = {
        "r_flux": r_flux,
        "r_energy": r_energy,
        "gap": gap,
        "x_load_sum": xinfo["load_sum"],
        "x_galerkin_gap": xinfo["galerkin_gap"],
        "theta_compatibility_residual": tinfo["compatibility_residual"],
        "x_solve": report(xinfo["report"]),
        "theta_solve": report(tinfo["report"]),
        "cell_area": mesh.area,
        "m": m,
        "n": n,
    }
    log.info("cell problem m=%d n=%d: r=%.12g (energy gap %.2e)", m, n, r_flux, gap)
    return CellSolutions(mesh, pairing, X, theta, r_flux, mesh.area, diagnostics)


def richardson_reference(values, ratio=2.0):
    """Extrapolate the last of three successively refined values.

    Returns ``(extrapolated value, observed order)``.
    """
    a, b, c = values
    d1, d2 = b - a, c - b
    if d2 == 0.0:
        return c, float("inf")
    p = np.log(abs(d1 / d2)) / np.log(ratio)
    return c + d2 / (ratio**p - 1.0), float(p)
