"""P1 finite elements on structured triangulations.

Volume integrals use the three edge-midpoint rule (exact for quadratics);
boundary integrals of P1 traces are integrated exactly edge by edge.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import MeshError
from .mesh import UPPER
from .sparse_linalg import DEFAULT_TOL, CsrMatrix, SolveReport, cg_solve

# barycentric coordinates of the edge midpoints, one row per quadrature point
MIDPOINT_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _gradients(p):
    # p: (T, 3, 2) vertex coordinates
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    if np.any(area <= 0):
        raise MeshError("degenerate or clockwise triangle")
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([gx, gy], axis=2) / (2.0 * area[:, None, None])
    return area, grads


def element_matrices(vertices):
    """Stiffness and mass matrices of one P1 triangle (or a stack of them).

    ``vertices`` has shape ``(3, 2)`` or ``(T, 3, 2)``.
    """
    p = np.asarray(vertices, dtype=float)
    single = p.ndim == 2
    if single:
        p = p[None]
    area, grads = _gradients(p)
    K = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    M = area[:, None, None] * _MASS_REF
    if single:
        return K[0], M[0]
    return K, M


def shape_gradients(mesh):
    """Triangle areas ``(T,)`` and barycentric gradients ``(T, 3, 2)``."""
    return _gradients(mesh.nodes[mesh.triangles])


def _scatter(mesh, local):
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    return CsrMatrix.from_scipy(A, symmetric=True)


def assemble_system(mesh):
    """Global stiffness ``K`` and mass ``M`` matrices."""
    K, M = element_matrices(mesh.nodes[mesh.triangles])
    return _scatter(mesh, K), _scatter(mesh, M)


def quadrature(mesh):
    """Edge-midpoint quadrature: points ``(T, 3, 2)`` and weights ``(T, 3)``."""
    p = mesh.nodes[mesh.triangles]
    pts = np.einsum("qi,tik->tqk", MIDPOINT_BARY, p)
    w = np.repeat(mesh.triangle_areas()[:, None] / 3.0, 3, axis=1)
    return pts, w


def assemble_volume_load(mesh, integrand):
    """Vector of integrals of ``integrand(x, y) * phi_i`` over the mesh."""
    pts, w = quadrature(mesh)
    vals = np.asarray(integrand(pts[..., 0], pts[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, w.shape)
    local = np.einsum("tq,qi->ti", vals * w, MIDPOINT_BARY)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def edge_geometry(mesh, edges):
    """Lengths and outward unit normals of counterclockwise-oriented edges."""
    a = mesh.nodes[edges[:, 0]]
    b = mesh.nodes[edges[:, 1]]
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    return length, normal


def boundary_n1_load(mesh, edges):
    """Exact integrals of N1 * phi_i over the given boundary edges."""
    length, normal = edge_geometry(mesh, edges)
    half = 0.5 * normal[:, 0] * length
    return np.bincount(edges.ravel(), weights=np.repeat(half, 2), minlength=mesh.n_nodes)


def assemble_upper_boundary_load(mesh):
    """Integrals of N1 * phi_i over the Upper edges, N1 from the polygonal edge."""
    return boundary_n1_load(mesh, mesh.edges_with_tag(UPPER))


class PeriodicCondensation:
    """Folds slave dofs onto their masters.

    ``P`` maps condensed vectors to full nodal vectors; the condensed
    operator is ``P^T A P``.
    """

    def __init__(self, n_nodes, pairing):
        masters = np.asarray(pairing.masters)
        slaves = np.asarray(pairing.slaves)
        if (len(np.unique(slaves)) != len(slaves) or np.intersect1d(masters, slaves).size
                or slaves.max(initial=-1) >= n_nodes or masters.max(initial=-1) >= n_nodes):
            raise MeshError("inconsistent periodic pairing")
        target = np.arange(n_nodes)
        target[slaves] = masters
        keep = np.ones(n_nodes, dtype=bool)
        keep[slaves] = False
        cond_index = np.cumsum(keep) - 1
        self.dof_map = cond_index[target]
        self.n_full = n_nodes
        self.n_condensed = int(keep.sum())
        self.P = sp.csr_matrix(
            (np.ones(n_nodes), (np.arange(n_nodes), self.dof_map)),
            shape=(n_nodes, self.n_condensed),
        )

    def condense_matrix(self, A):
        A = A.to_scipy() if isinstance(A, CsrMatrix) else sp.csr_matrix(A)
        return CsrMatrix.from_scipy(self.P.T @ A @ self.P, symmetric=True)

    def condense_vector(self, b):
        return self.P.T @ np.asarray(b, dtype=float)

    def expand(self, x):
        return np.asarray(x)[self.dof_map]


def apply_periodic(A, b, pairing):
    """Return ``(condensed A, condensed b, condensation)``."""
    cond = PeriodicCondensation(A.shape[0], pairing)
    return cond.condense_matrix(A), cond.condense_vector(b), cond


@dataclass
class FemSolution:
    mesh: object
    values: np.ndarray
    report: SolveReport
    load: np.ndarray = None

    def __post_init__(self):
        if len(self.values) != self.mesh.n_nodes:
            raise ValueError("one value per mesh node is required")


def solve_neumann(mesh, eps, source, tol=DEFAULT_TOL, jacobi=True, maxit=None, system=None):
    """Solve -Laplace(w) + w = f(x1) on the thin mesh with natural Neumann data.

    ``system`` may pass a precomputed ``(K, M)`` pair.
    """
    K, M = assemble_system(mesh) if system is None else system
    A = K + M
    load = assemble_volume_load(mesh, lambda x, y: source.value(x))
    u, report = cg_solve(A, load, tol=tol, maxit=maxit, jacobi=jacobi)
    return FemSolution(mesh, u, report, load)


def p1_at_quadrature(mesh, u):
    """Values ``(T, 3)`` at midpoints and constant gradients ``(T, 2)`` of a P1 field."""
    u = np.asarray(u, dtype=float)
    loc = u[mesh.triangles]
    _, grads = shape_gradients(mesh)
    return loc @ MIDPOINT_BARY.T, np.einsum("ti,tik->tk", loc, grads)


def rescaled_norms(mesh, eps, values, gradients):
    """Rescaled (eps^{-1/2}-weighted) L2 and H1 norms from quadrature samples.

    ``values`` has shape ``(T, 3)``; ``gradients`` is ``(T, 2)`` for
    piecewise-constant gradients or ``(T, 3, 2)`` per quadrature point.
    """
    _, w = quadrature(mesh)
    values = np.asarray(values, dtype=float)
    gradients = np.asarray(gradients, dtype=float)
    if gradients.ndim == 2:
        gradients = np.broadcast_to(gradients[:, None, :], w.shape + (2,))
    l2sq = np.sum(w * values**2) / eps
    h1sq = l2sq + np.sum(w * np.sum(gradients**2, axis=-1)) / eps
    return float(np.sqrt(l2sq)), float(np.sqrt(h1sq))


def boundary_l2_norm(mesh, u):
    """Exact L2 norm of the P1 trace of ``u`` over the whole boundary."""
    u = np.asarray(u, dtype=float)
    length, _ = edge_geometry(mesh, mesh.edges)
    a = u[mesh.edges[:, 0]]
    b = u[mesh.edges[:, 1]]
    return float(np.sqrt(np.sum(length * (a * a + a * b + b * b) / 3.0)))
