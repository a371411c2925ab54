"""Structured P1 triangulations of the thin domain and of the basic cell.

Both meshes are tensor grids: ``M + 1`` node columns, each split into ``n``
layers whose heights are proportional to the local top height.  Node
``(i, j)`` (column ``i``, layer ``j``) has index ``i * (n + 1) + j`` and quad
``(i, j)`` owns triangles ``2 * (i * n + j)`` and ``2 * (i * n + j) + 1``.
Each quad is split along its shorter diagonal, measured on the cell
geometry (ties go to lower-left/upper-right).  ``flip[i, j]`` marks quads
split along lower-right/upper-left; their triangles are
``(LL, LR, UL)`` and ``(LR, UR, UL)``, otherwise ``(LL, LR, UR)`` and
``(LL, UR, UL)``.
"""
from dataclasses import dataclass
import math

import numpy as np

from .exceptions import DomainError, MeshError
from .geometry import BOUNDARY_SLACK, reduce_periodic

LOWER, UPPER, LATERAL_LEFT, LATERAL_RIGHT = 0, 1, 2, 3
EDGE_TAG_NAMES = {LOWER: "Lower", UPPER: "Upper", LATERAL_LEFT: "LateralLeft",
                  LATERAL_RIGHT: "LateralRight"}


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable structured triangulation.

    ``column_x`` and ``column_top`` give the abscissa and the top height of
    every node column; ``edges`` are oriented counterclockwise around the
    region so that ``(dy, -dx)`` is the outward normal.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    columns: int
    layers: int
    column_x: np.ndarray
    column_top: np.ndarray
    flip: np.ndarray
    kind: str = "cell"
    eps: float = 1.0
    cells_per_period: int = 0

    def __post_init__(self):
        for name in ("nodes", "triangles", "edges", "edge_tags", "column_x", "column_top",
                     "flip"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def dx(self):
        return self.column_x[1] - self.column_x[0]

    def node_index(self, i, j):
        return np.asarray(i) * (self.layers + 1) + np.asarray(j)

    def triangle_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self):
        return float(np.sum(self.triangle_areas()))

    def edges_with_tag(self, tag):
        return self.edges[self.edge_tags == tag]

    def boundary_loop(self):
        """Boundary node indices in counterclockwise order (not closed)."""
        M, n = self.columns, self.layers
        lower = self.node_index(np.arange(M + 1), 0)
        right = self.node_index(M, np.arange(1, n + 1))
        upper = self.node_index(np.arange(M - 1, -1, -1), n)
        left = self.node_index(0, np.arange(n - 1, 0, -1))
        return np.concatenate([lower, right, upper, left])

    def shoelace_area(self):
        p = self.nodes[self.boundary_loop()]
        x, y = p[:, 0], p[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def top_height(self, x):
        """Height of the polygonal top boundary above abscissa ``x``."""
        return np.interp(x, self.column_x, self.column_top)

    def cell_triangle_of(self, tri):
        """Cell-mesh triangle whose scaled image is thin triangle ``tri``."""
        if self.kind != "thin":
            return np.asarray(tri)
        return np.asarray(tri) % (2 * self.layers * self.cells_per_period)

    def dump(self, path):
        """Write the plain-text debug format described in the README."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.n_nodes}\n")
            for x, y in self.nodes:
                fh.write(f"{x!r} {y!r}\n")
            fh.write(f"{self.n_triangles}\n")
            for a, b, c in self.triangles:
                fh.write(f"{a} {b} {c}\n")
            fh.write(f"{len(self.edges)}\n")
            for (a, b), tag in zip(self.edges, self.edge_tags):
                fh.write(f"{a} {b} {EDGE_TAG_NAMES[int(tag)]}\n")


@dataclass(frozen=True)
class PeriodicPairing:
    """(master on y = 0, slave on y = L) node pairs, one per layer line."""

    pairs: np.ndarray

    def __len__(self):
        return len(self.pairs)

    @property
    def masters(self):
        return self.pairs[:, 0]

    @property
    def slaves(self):
        return self.pairs[:, 1]


def _nodes(column_x, column_top, layers):
    s = np.arange(layers + 1) / layers
    return np.column_stack([np.repeat(column_x, layers + 1), np.outer(column_top, s).ravel()])


def shorter_diagonal_flags(column_x, column_top, layers):
    """``(M, n)`` flags: True where the LR-UL diagonal is strictly shorter."""
    p = _nodes(column_x, column_top, layers).reshape(len(column_x), layers + 1, 2)
    ll, lr = p[:-1, :-1], p[1:, :-1]
    ul, ur = p[:-1, 1:], p[1:, 1:]
    d_main = np.sum((ur - ll) ** 2, axis=-1)
    d_anti = np.sum((ul - lr) ** 2, axis=-1)
    return d_anti < d_main


def _structured(column_x, column_top, layers, flip):
    M = len(column_x) - 1
    n = layers
    nodes = _nodes(column_x, column_top, n)

    i, j = np.meshgrid(np.arange(M), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ll = i * (n + 1) + j
    lr = ll + (n + 1)
    ur = lr + 1
    ul = ll + 1
    f = flip.ravel()[:, None]
    tris = np.empty((2 * M * n, 3), dtype=np.int64)
    tris[0::2] = np.where(f, np.column_stack([ll, lr, ul]), np.column_stack([ll, lr, ur]))
    tris[1::2] = np.where(f, np.column_stack([lr, ur, ul]), np.column_stack([ll, ur, ul]))

    node = lambda a, b: np.asarray(a) * (n + 1) + np.asarray(b)
    ci = np.arange(M)
    lj = np.arange(n)
    lower = np.column_stack([node(ci, 0), node(ci + 1, 0)])
    right = np.column_stack([node(M, lj), node(M, lj + 1)])
    upper = np.column_stack([node(ci + 1, n), node(ci, n)])
    left = np.column_stack([node(0, lj + 1), node(0, lj)])
    edges = np.concatenate([lower, right, upper, left])
    tags = np.concatenate([
        np.full(M, LOWER), np.full(n, LATERAL_RIGHT),
        np.full(M, UPPER), np.full(n, LATERAL_LEFT),
    ])
    return nodes, tris, edges, tags


def _check_sizes(m, n):
    if int(m) != m or int(n) != n:
        raise MeshError("mesh sizes must be integers")
    if m < 2 or n < 1:
        raise MeshError(f"degenerate mesh size m={m}, n={n} (need m >= 2, n >= 1)")


def period_count(eps, period):
    """Number of whole periods in [0, 1]; raises unless 1/(eps L) is an integer."""
    if not eps > 0:
        raise MeshError(f"eps must be positive, got {eps}")
    q = 1.0 / (float(eps) * float(period))
    P = round(q)
    if P < 1 or abs(q - P) > 1e-9 * q:
        raise MeshError(f"1/(eps*L) = {q!r} is not a positive integer")
    return int(P)


def build_cell_mesh(profile, m, n):
    """Mesh the basic cell {0 < y < L, 0 < z < g(y)}; return ``(mesh, pairing)``."""
    _check_sizes(m, n)
    L = profile.period
    y = np.arange(m + 1) * (L / m)
    y[-1] = L
    top = profile.g(np.arange(m + 1) * (L / m))
    top[-1] = top[0]
    flip = shorter_diagonal_flags(y, top, n)
    nodes, tris, edges, tags = _structured(y, top, n, flip)
    mesh = TriMesh(nodes, tris, edges, tags, m, n, y, top, flip, kind="cell",
                   eps=1.0, cells_per_period=m)
    j = np.arange(n + 1)
    pairing = PeriodicPairing(np.column_stack([mesh.node_index(0, j), mesh.node_index(m, j)]))
    return mesh, pairing


def build_thin_mesh(profile, eps, m, n):
    """Mesh R^eps = {0 < x1 < 1, 0 < x2 < eps g(x1/eps)} with m columns per period.

    The mesh over each period is the exact ``eps``-scaled image of the cell
    mesh with the same ``m`` and ``n``.
    """
    _check_sizes(m, n)
    L = profile.period
    P = period_count(eps, L)
    M = P * m
    i = np.arange(M + 1)
    x = i * (eps * L / m)
    x[-1] = 1.0
    cell_y = (i % m) * (L / m)
    top = eps * profile.g(cell_y)
    # diagonals decided on the unscaled cell so both meshes split identically
    cell_x = np.arange(m + 1) * (L / m)
    cell_x[-1] = L
    cell_top = profile.g(np.arange(m + 1) * (L / m))
    cell_top[-1] = cell_top[0]
    flip = np.tile(shorter_diagonal_flags(cell_x, cell_top, n), (P, 1))
    nodes, tris, edges, tags = _structured(x, top, n, flip)
    return TriMesh(nodes, tris, edges, tags, M, n, x, top, flip, kind="thin",
                   eps=float(eps), cells_per_period=m)


def locate_point(mesh, y, z, period=None, profile=None):
    """Locate cell points; return ``(triangle indices, barycentric coordinates)``.

    Uses the structured layout for O(1) lookup.  Ties on a grid line resolve
    to the left column and the lower layer; ties on the quad diagonal
    resolve to the lower-right triangle.  Points up to a small slack above
    the top (the polygonal top or, when ``profile`` is given, the analytic
    top) are clamped onto the top edge.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    M, n = mesh.columns, mesh.layers
    x0, x1 = mesh.column_x[0], mesh.column_x[-1]
    if period is not None:
        y = reduce_periodic(y, period)
    if np.any(y < x0 - 1e-12) or np.any(y > x1 + 1e-12):
        raise DomainError("abscissa outside the meshed interval")
    if np.any(z < -1e-12 * np.max(mesh.column_top)):
        raise DomainError("point lies below the lower boundary")

    h = mesh.dx
    col = np.clip(np.ceil((y - x0) / h).astype(np.int64) - 1, 0, M - 1)
    t = (y - mesh.column_x[col]) / (mesh.column_x[col + 1] - mesh.column_x[col])
    top = (1.0 - t) * mesh.column_top[col] + t * mesh.column_top[col + 1]
    limit = top if profile is None else np.maximum(top, profile.g(y))
    if np.any(z > limit * (1.0 + BOUNDARY_SLACK)):
        raise DomainError("point lies above the top boundary")
    s = np.clip(z / top, 0.0, 1.0)
    lay = np.clip(np.ceil(s * n).astype(np.int64) - 1, 0, n - 1)
    zc = s * top

    ll = col * (n + 1) + lay
    flip = mesh.flip[col, lay]
    # diagonal from a to b: LL->UR, or LR->UL for flipped quads
    a = np.where(flip, ll + (n + 1), ll)
    b = np.where(flip, ll + 1, ll + (n + 1) + 1)
    pa, pb = mesh.nodes[a], mesh.nodes[b]
    cross = (pb[:, 0] - pa[:, 0]) * (zc - pa[:, 1]) - (pb[:, 1] - pa[:, 1]) * (y - pa[:, 0])
    upper = np.where(flip, cross < 0, cross > 0)
    tri = 2 * (col * n + lay) + upper.astype(np.int64)

    bary = barycentric(mesh, tri, np.column_stack([y, zc]))
    bary = np.clip(bary, 0.0, 1.0)
    bary /= bary.sum(axis=1, keepdims=True)
    return tri, bary


def barycentric(mesh, tri, points):
    """Barycentric coordinates of ``points`` in triangles ``tri`` (no clamping)."""
    p = mesh.nodes[mesh.triangles[tri]]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    v0 = b - a
    v1 = c - a
    v2 = np.asarray(points) - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def check_alignment(thin, cell, profile):
    """Assert that every period of ``thin`` is the scaled image of ``cell``."""
    if thin.layers != cell.layers or thin.cells_per_period != cell.columns:
        raise MeshError("thin and cell meshes use different m or n")
    eps = thin.eps
    m = cell.columns
    P = thin.columns // m
    idx = np.arange(thin.columns + 1)
    k = idx // m
    local = idx % m
    local = np.where((idx == thin.columns), m, local)
    k = np.where(idx == thin.columns, P - 1, k)
    expect_x = eps * (k * profile.period + cell.column_x[local])
    expect_top = eps * cell.column_top[local]
    if not (np.allclose(thin.column_x, expect_x, rtol=0, atol=1e-12)
            and np.allclose(thin.column_top, expect_top, rtol=1e-12, atol=0)):
        raise MeshError("thin mesh columns are not scaled images of the cell columns")
    if not math.isclose(thin.column_x[-1], 1.0, abs_tol=1e-12):
        raise MeshError("thin mesh does not end at x1 = 1")
