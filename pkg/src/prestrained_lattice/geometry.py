"""Domains, shrunken domains and simplicial triangulations of sheared lattices.

Lattice points are always addressed by integer indices ``m`` of the canonical
lattice, with physical position ``epsilon * m``.  A sheared, translated lattice
``epsilon * (tau + B Z^n)`` therefore shares its nodes with the canonical one,
and a cell with integer index ``c`` is the parallelepiped
``epsilon * (tau + B (c + [0, 1]^n))``.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Tuple

import numpy as np
from scipy.optimize import linprog

from ._validation import check_integer_matrix, check_points, check_positive, int_det

__all__ = [
    "Box",
    "ConvexPolygon",
    "ShrunkenDomain",
    "Simplex",
    "Triangulation",
    "P1Mesh",
    "Quadrature",
    "shrink",
    "regular_polygon",
    "covered_cells",
    "enumerate_simplices",
    "lattice_nodes",
    "interacting_nodes",
    "background_mesh",
    "permutations",
]


def permutations(n):
    """All permutations of ``range(n)`` in lexicographic order, shape ``(n!, n)``."""
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


class _ConvexRegion:
    """Open convex polytope ``{x : N x < c}`` with unit outward normals ``N``."""

    dim: int

    def halfspaces(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def depth(self, x):
        """``min_k (c_k - N_k . x)``; equals ``dist(x, boundary)`` for interior points."""
        N, c = self.halfspaces()
        x = check_points(x, self.dim)
        return np.min(c - x @ N.T, axis=-1)

    def contains(self, x):
        return self.depth(x) > 0

    def bounding_box(self):
        raise NotImplementedError

    def inradius(self):
        """Largest ``s`` with a ball of radius ``s`` inside (Chebyshev radius)."""
        N, c = self.halfspaces()
        n = self.dim
        # maximise r subject to N x + r <= c
        res = linprog(
            np.r_[np.zeros(n), -1.0],
            A_ub=np.c_[N, np.ones(len(c))],
            b_ub=c,
            bounds=[(None, None)] * n + [(None, None)],
            method="highs",
        )
        if res.status != 0:
            return 0.0
        return max(-res.fun, 0.0)

    def is_empty(self):
        return self.inradius() <= 0.0


@dataclass(frozen=True)
class Box(_ConvexRegion):
    """Open axis-aligned box ``(lower, upper)`` in any dimension."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("lower and upper must have the same positive length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, n=2):
        return cls((0.0,) * n, (1.0,) * n)

    @property
    def dim(self):
        return len(self.lower)

    def halfspaces(self):
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye]), np.r_[self.upper, -np.asarray(self.lower)]

    def distance_to_boundary(self, x):
        x = check_points(x, self.dim)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        inside = np.all((x > lo) & (x < hi), axis=-1)
        d_in = np.min(np.minimum(x - lo, hi - x), axis=-1)
        d_out = np.linalg.norm(np.maximum(lo - x, 0) + np.maximum(x - hi, 0), axis=-1)
        return np.where(inside, d_in, d_out)

    def bounding_box(self):
        return np.array(self.lower), np.array(self.upper)

    def inradius(self):
        return 0.5 * min(b - a for a, b in zip(self.lower, self.upper))

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    @property
    def center(self):
        return 0.5 * (np.array(self.lower) + np.array(self.upper))

    @property
    def diameter(self):
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))


@dataclass(frozen=True)
class ConvexPolygon(_ConvexRegion):
    """Open strictly convex polygon with counterclockwise vertices."""

    vertices: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        E = np.roll(V, -1, axis=0) - V
        if np.any(np.linalg.norm(E, axis=1) == 0):
            raise ValueError("polygon vertices must not repeat")
        cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise ValueError("polygon must be strictly convex and counterclockwise")
        object.__setattr__(self, "vertices", tuple(map(tuple, V.tolist())))

    @property
    def dim(self):
        return 2

    def _array(self):
        return np.asarray(self.vertices)

    def halfspaces(self):
        V = self._array()
        E = np.roll(V, -1, axis=0) - V
        N = np.c_[E[:, 1], -E[:, 0]] / np.linalg.norm(E, axis=1)[:, None]
        return N, np.einsum("ij,ij->i", N, V)

    def distance_to_boundary(self, x):
        """Exact Euclidean distance to the polygon's edges."""
        x = check_points(x, 2)
        V = self._array()
        W = np.roll(V, -1, axis=0)
        d = W - V
        rel = x[..., None, :] - V
        t = np.clip(np.einsum("...kj,kj->...k", rel, d) / np.einsum("kj,kj->k", d, d), 0.0, 1.0)
        closest = V + t[..., None] * d
        return np.min(np.linalg.norm(x[..., None, :] - closest, axis=-1), axis=-1)

    def contains(self, x):
        N, c = self.halfspaces()
        x = check_points(x, 2)
        return np.all(x @ N.T < c, axis=-1)

    def bounding_box(self):
        V = self._array()
        return V.min(axis=0), V.max(axis=0)

    @property
    def volume(self):
        V = self._array()
        W = np.roll(V, -1, axis=0)
        return 0.5 * float(np.sum(V[:, 0] * W[:, 1] - V[:, 1] * W[:, 0]))

    @property
    def center(self):
        V = self._array()
        W = np.roll(V, -1, axis=0)
        cr = V[:, 0] * W[:, 1] - V[:, 1] * W[:, 0]
        return np.array([np.sum((V[:, 0] + W[:, 0]) * cr), np.sum((V[:, 1] + W[:, 1]) * cr)]) / (
            6.0 * self.volume
        )

    @property
    def diameter(self):
        V = self._array()
        return float(np.max(np.linalg.norm(V[:, None] - V[None], axis=-1)))


def regular_polygon(n_vertices=64, radius=1.0, center=(0.0, 0.0)):
    """Polygon inscribed in the circle of the given radius; first vertex on the x-axis."""
    if n_vertices < 3:
        raise ValueError("need at least 3 vertices")
    t = 2.0 * np.pi * np.arange(n_vertices) / n_vertices
    V = np.c_[np.cos(t), np.sin(t)] * radius + np.asarray(center, dtype=float)
    return ConvexPolygon(tuple(map(tuple, V)))


@dataclass(frozen=True)
class ShrunkenDomain(_ConvexRegion):
    """``{x in base : dist(x, boundary of base) > s}``."""

    base: _ConvexRegion
    s: float

    @property
    def dim(self):
        return self.base.dim

    def halfspaces(self):
        N, c = self.base.halfspaces()
        return N, c - self.s

    def contains(self, x):
        x = check_points(x, self.dim)
        if isinstance(self.base, ConvexPolygon):
            return self.base.contains(x) & (self.base.distance_to_boundary(x) > self.s)
        return super().contains(x)

    def bounding_box(self):
        lo, hi = self.base.bounding_box()
        return lo + self.s, hi - self.s

    def inradius(self):
        return max(self.base.inradius() - self.s, 0.0)

    def as_box(self):
        """The shrunken box itself, or ``None`` when it is empty."""
        if not isinstance(self.base, Box):
            raise TypeError("as_box is only defined for box domains")
        lo = np.asarray(self.base.lower) + self.s
        hi = np.asarray(self.base.upper) - self.s
        if np.any(lo >= hi):
            return None
        return Box(tuple(lo), tuple(hi))


def shrink(domain, s):
    """Return ``domain_s``; shrinking a shrunken convex domain adds the offsets."""
    s = check_positive(s, "s", strict=False)
    if isinstance(domain, ShrunkenDomain):
        return ShrunkenDomain(domain.base, domain.s + s)
    return ShrunkenDomain(domain, s)


@dataclass(frozen=True)
class Simplex:
    """``epsilon * (tau + B (cell + conv{0, e_p(1), e_p(1)+e_p(2), ...}))``."""

    cell: Tuple[int, ...]
    perm: Tuple[int, ...]
    epsilon: float
    basis: np.ndarray = field(compare=False)
    translation: np.ndarray = field(compare=False)

    def vertex_indices(self):
        n = len(self.cell)
        steps = np.zeros((n + 1, n), dtype=np.int64)
        for j, p in enumerate(self.perm):
            steps[j + 1 :, p] += 1
        return self.translation + (np.asarray(self.cell) + steps) @ self.basis.T

    def vertices(self):
        return self.epsilon * self.vertex_indices().astype(float)

    @property
    def volume(self):
        n = len(self.cell)
        return self.epsilon**n * abs(int_det(self.basis)) / math.factorial(n)


@dataclass(frozen=True)
class Triangulation:
    """Standard (Kuhn) triangulation of the cells of ``epsilon * (tau + B Z^n)``."""

    epsilon: float
    basis: np.ndarray
    translation: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        B = check_integer_matrix(self.basis)
        if int_det(B) == 0:
            raise ValueError("basis matrix is singular")
        tau = np.asarray(self.translation, dtype=np.int64).reshape(B.shape[0])
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, B.shape[0])
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "translation", tau)
        object.__setattr__(self, "cells", cells)
        check_positive(self.epsilon, "epsilon")

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def cell_volume(self):
        return self.epsilon**self.dim * abs(int_det(self.basis))

    @property
    def n_simplices(self):
        return len(self.cells) * math.factorial(self.dim)

    def base_points(self):
        """Physical base corner of each cell."""
        return self.epsilon * (self.translation + self.cells @ self.basis.T).astype(float)

    def simplex_vertices(self):
        """Integer node indices of all simplices, shape ``(cells * n!, n + 1, n)``.

        Ordering is cell-major (cells in stored order), permutations lexicographic.
        Vertex ``j`` is the ``j``-th point of the edge chain.
        """
        n = self.dim
        perms = permutations(n)
        steps = np.zeros((len(perms), n + 1, n), dtype=np.int64)
        for q, perm in enumerate(perms):
            for j, p in enumerate(perm):
                steps[q, j + 1 :, p] += 1
        local = self.cells[:, None, None, :] + steps[None]
        nodes = self.translation + local @ self.basis.T
        return nodes.reshape(-1, n + 1, n)

    def simplex_perms(self):
        perms = permutations(self.dim)
        return np.tile(perms, (len(self.cells), 1))

    def simplex_volume(self):
        return self.cell_volume / math.factorial(self.dim)


def enumerate_simplices(t: Triangulation) -> Iterator[Simplex]:
    """Yield the ``n!`` simplices of every cell, permutations in lexicographic order."""
    perms = permutations(t.dim)
    for cell in t.cells:
        for perm in perms:
            yield Simplex(tuple(int(v) for v in cell), tuple(int(v) for v in perm),
                          t.epsilon, t.basis, t.translation)


def _cube_vertices(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def _candidate_cells(region, epsilon, B, tau):
    lo, hi = region.bounding_box()
    n = B.shape[0]
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    Binv = np.linalg.inv(B.astype(float))
    y = (corners / epsilon - tau) @ Binv.T
    cmin = np.floor(y.min(axis=0)).astype(np.int64) - 1
    cmax = np.ceil(y.max(axis=0)).astype(np.int64) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(cmin, cmax)]
    return np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, n)


def _cells_meeting(region, epsilon, B, tau, cells):
    """Boolean mask of cells whose open parallelepiped meets the open polytope."""
    if len(cells) == 0:
        return np.zeros(0, dtype=bool)
    N, c = region.halfspaces()
    n = B.shape[0]
    verts = epsilon * (tau + (cells[:, None, :] + _cube_vertices(n)[None]) @ B.T).astype(float)
    proj = verts @ N.T  # (C, 2^n, K)
    separated = np.any(np.all(proj >= c - 1e-12 * epsilon, axis=1), axis=1)
    inside = np.any(np.all(proj < c, axis=2), axis=1)
    result = inside & ~separated
    undecided = ~separated & ~inside
    tol = 1e-9 * epsilon
    A_box = np.vstack([np.c_[-np.eye(n), np.ones(n)], np.c_[np.eye(n), np.ones(n)]])
    b_box = np.r_[np.zeros(n), np.ones(n)]
    NB = epsilon * N @ B
    for i in np.flatnonzero(undecided):
        base = epsilon * (tau + B @ cells[i])
        A_ub = np.vstack([A_box, np.c_[NB, np.ones(len(c))]])
        b_ub = np.r_[b_box, c - N @ base]
        res = linprog(np.r_[np.zeros(n), -1.0], A_ub=A_ub, b_ub=b_ub,
                      bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
        result[i] = res.status == 0 and -res.fun > tol
    return result


def _lex_sorted(idx):
    if len(idx) == 0:
        return idx
    order = np.lexsort(idx.T[::-1])
    return idx[order]


def covered_cells(domain, epsilon, B=None, tau=None, margin=0.0):
    """Integer indices ``c`` whose open cell ``epsilon (tau + B (c + (0,1)^n))`` meets ``domain_margin``.

    ``tau`` is given at unit scale (an integer vector).  The result is in
    lexicographic order.
    """
    epsilon = check_positive(epsilon, "epsilon")
    margin = check_positive(margin, "margin", strict=False)
    n = domain.dim
    B = np.eye(n, dtype=np.int64) if B is None else check_integer_matrix(B)
    if int_det(B) == 0:
        raise ValueError("basis matrix is singular")
    tau = np.zeros(n, dtype=np.int64) if tau is None else np.asarray(tau, dtype=np.int64)
    region = shrink(domain, margin) if margin > 0 else domain
    if region.inradius() <= 0:
        return np.zeros((0, n), dtype=np.int64)
    cand = _candidate_cells(region, epsilon, B, tau)
    return _lex_sorted(cand[_cells_meeting(region, epsilon, B, tau, cand)])


def lattice_nodes(domain, epsilon):
    """Integer indices ``m`` with ``epsilon * m`` inside the (open) domain, lexicographic."""
    epsilon = check_positive(epsilon, "epsilon")
    lo, hi = domain.bounding_box()
    axes = [np.arange(math.floor(a / epsilon), math.ceil(b / epsilon) + 1) for a, b in zip(lo, hi)]
    idx = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, domain.dim)
    return idx[domain.contains(epsilon * idx.astype(float))]


def interacting_nodes(xi, epsilon, region):
    """Nodes ``alpha`` of ``epsilon Z^n`` with the closed segment ``[alpha, alpha + epsilon xi]`` in ``region``.

    For a convex open region both endpoints inside is equivalent to the whole
    segment inside.
    """
    xi = np.asarray(xi, dtype=np.int64)
    if not np.any(xi):
        raise ValueError("interaction vector must be nonzero")
    nodes = lattice_nodes(region, epsilon)
    ends = epsilon * (nodes + xi).astype(float)
    return nodes[region.contains(ends)]


@dataclass(frozen=True)
class P1Mesh:
    """Simplicial mesh with nodal P1 interpolation helpers."""

    points: np.ndarray
    simplices: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        sim = np.asarray(self.simplices, dtype=np.int64)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "simplices", sim)
        V = pts[sim]
        E = V[:, 1:] - V[:, :1]  # (S, n, n) rows are edges
        det = np.linalg.det(E)
        if np.any(det == 0):
            raise ValueError("degenerate simplex in mesh")
        n = pts.shape[1]
        inv = np.linalg.inv(E)  # columns give gradients of barycentric coords 1..n
        grads = np.empty((len(sim), n + 1, n))
        grads[:, 1:] = np.swapaxes(inv, 1, 2)
        grads[:, 0] = -grads[:, 1:].sum(axis=1)
        object.__setattr__(self, "_grads", grads)
        object.__setattr__(self, "_volumes", np.abs(det) / math.factorial(n))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def volumes(self):
        return self._volumes

    @property
    def centroids(self):
        return self.points[self.simplices].mean(axis=1)

    @property
    def barycentric_gradients(self):
        return self._grads

    def gradient(self, U):
        """Per-simplex gradient ``(S, m, n)`` of nodal values ``U`` of shape ``(P, m)``."""
        return np.einsum("sam,san->smn", U[self.simplices], self._grads)

    def pullback(self, dF):
        """Nodal gradient of ``sum_s f_s(grad u_s)`` given ``dF = df_s/d(grad u_s)``."""
        out = np.zeros((len(self.points), dF.shape[1]))
        contrib = np.einsum("smn,san->sam", dF, self._grads)
        np.add.at(out, self.simplices, contrib)
        return out


@dataclass(frozen=True)
class Quadrature:
    """Midpoint (centroid) rule on a background triangulation."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.centroids, mesh.volumes)

    @classmethod
    def for_domain(cls, domain, resolution=32):
        return cls.from_mesh(background_mesh(domain, resolution))

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def background_mesh(domain, resolution=32):
    """Conforming simplicial mesh of a box (Kuhn split of a uniform grid) or a polygon.

    Polygons are fanned from their centroid and every fan triangle is split
    uniformly into ``resolution**2`` triangles, so a rotation mapping the
    polygon onto itself maps the mesh onto itself.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if isinstance(domain, Box):
        n = domain.dim
        lo, hi = domain.bounding_box()
        shape = (resolution + 1,) * n
        grid = np.array(list(itertools.product(range(resolution + 1), repeat=n)), dtype=np.int64)
        points = lo + grid / resolution * (hi - lo)
        cells = np.array(list(itertools.product(range(resolution), repeat=n)), dtype=np.int64).reshape(-1, n)
        t = Triangulation(1.0, np.eye(n, dtype=np.int64), np.zeros(n, dtype=np.int64), cells)
        verts = t.simplex_vertices()
        flat = np.ravel_multi_index(tuple(np.moveaxis(verts, -1, 0)), shape)
        return P1Mesh(points, flat)
    if isinstance(domain, ConvexPolygon):
        V = domain._array()
        ctr = np.zeros(2) if np.allclose(domain.center, 0) else domain.center
        r = resolution
        tris = []
        pts = []
        local = [(i, j) for i in range(r + 1) for j in range(r + 1 - i)]
        lid = {ij: k for k, ij in enumerate(local)}
        for k in range(len(V)):
            a, b = V[k], V[(k + 1) % len(V)]
            base = len(pts)
            for i, j in local:
                pts.append(ctr + (i / r) * (a - ctr) + (j / r) * (b - ctr))
            for i in range(r):
                for j in range(r - i):
                    tris.append([base + lid[(i, j)], base + lid[(i + 1, j)], base + lid[(i, j + 1)]])
                    if i + j + 2 <= r:
                        tris.append([base + lid[(i + 1, j)], base + lid[(i + 1, j + 1)], base + lid[(i, j + 1)]])
        pts = np.array(pts)
        key = np.round(pts / max(domain.diameter, 1.0) * 1e10).astype(np.int64)
        _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
        return P1Mesh(pts[first], inverse.reshape(-1)[np.array(tris)])
    raise TypeError(f"unsupported domain type {type(domain).__name__}")
