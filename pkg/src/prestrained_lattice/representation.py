"""Integral representations of the discrete energy on sheared, translated lattices.

For a family ``B`` and shift ``tau`` the nodal values are extended piecewise
affinely on the Kuhn triangulation of ``eps (tau + B Z^n)``.  On every simplex
the gradient and the matrix field ``lam`` are constant, and the ``n`` chain
edges of the simplex give

    eps^n sum_j (|du_j| / (eps |A B e_j|) - 1)^2 = n! / |det B| * integral of W(grad u lam),

so summing over all simplices, shifts and families with the weights
``1 / (n! n k)`` recovers every interior interaction exactly once.
"""

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .density import W
from .discrete import Cutoff, DiscreteDeformation, DiscreteEnergy
from .geometry import Triangulation, covered_cells, shrink
from .lattices import lattice_set

__all__ = [
    "PiecewiseAffineField",
    "EnergyReport",
    "extend_p1",
    "lambda_field",
    "simplex_edge_sums",
    "representation_margin",
    "family_triangulation",
    "integral_representation",
    "nearest_representation",
    "next_nearest_representation_2d",
    "segments_meet",
    "boundary_bound",
    "B0",
]

B0 = np.array([[1, -1], [1, 1]], dtype=np.int64)


@dataclass(frozen=True)
class PiecewiseAffineField:
    """Continuous piecewise affine map on a triangulation.

    ``gradients[s]`` and ``offsets[s]`` define ``x -> gradients[s] @ x + offsets[s]``
    on simplex ``s``; ``nodes``/``values`` are the interpolated vertex data.
    """

    triangulation: Triangulation
    nodes: np.ndarray  # (S, n+1, n) integer vertex indices
    values: np.ndarray  # (S, n+1, m)
    gradients: np.ndarray  # (S, m, n)
    offsets: np.ndarray  # (S, m)

    @property
    def volumes(self):
        return np.full(len(self.gradients), self.triangulation.simplex_volume())

    def __len__(self):
        return len(self.gradients)

    def evaluate(self, x, simplex):
        """Value at points ``x`` known to lie in the given simplices."""
        x = np.asarray(x, dtype=float)
        simplex = np.asarray(simplex)
        return np.einsum("...mn,...n->...m", self.gradients[simplex], x) + self.offsets[simplex]


def extend_p1(u: DiscreteDeformation, t: Triangulation) -> PiecewiseAffineField:
    """P1 interpolant of ``u`` on ``t``; raises ``KeyError`` if a vertex has no value."""
    if abs(u.epsilon - t.epsilon) > 1e-15 * t.epsilon:
        raise ValueError("deformation and triangulation use different lattice spacings")
    nodes = t.simplex_vertices()
    vals = u.lookup(nodes)
    X = t.epsilon * nodes.astype(float)
    E = X[:, 1:] - X[:, :1]  # rows: edge vectors
    dU = vals[:, 1:] - vals[:, :1]
    if len(E):
        grads = np.swapaxes(np.linalg.solve(E, dU), 1, 2)
    else:
        grads = np.zeros((0, vals.shape[-1], t.dim))
    offsets = vals[:, 0] - np.einsum("smn,sn->sm", grads, X[:, 0]) if len(E) else np.zeros((0, vals.shape[-1]))
    return PiecewiseAffineField(t, nodes, vals, grads, offsets)


def _chain_points(t, reversed):
    """Point at which ``A`` is sampled for the edge along ``B e_j`` on each simplex.

    Forward: the chain vertex where the step in direction ``j`` starts.
    Reversed: the vertex where it ends.  Returns shape ``(S, n, n)`` indexed by ``j``.
    """
    n = t.dim
    verts = t.epsilon * t.simplex_vertices().astype(float)
    perms = t.simplex_perms()
    inv = np.argsort(perms, axis=1)  # inv[s, j] = step position of direction j
    pos = inv + (1 if reversed else 0)
    return np.take_along_axis(verts, pos[:, :, None], axis=1)


def lambda_field(metric, t: Triangulation, reversed=False, radius=None):
    """Per-simplex matrix ``B diag{|A(p_j) B e_j|^{-1}}``.

    ``p_j`` is the start (or, with ``reversed``, the end) of the chain edge
    along ``B e_j``.  ``radius`` multiplies the field by a constant; the
    default ``None`` keeps the normalization for which the simplex identity
    holds.
    """
    B = t.basis.astype(float)
    pts = _chain_points(t, reversed)
    A = metric.sqrt(pts)  # (S, n, n, n) with A[s, j]
    cols = np.einsum("sjab,bj->sja", A, B)
    norms = np.linalg.norm(cols, axis=-1)
    lam = B[None] / norms[:, None, :]
    if radius is not None:
        lam = float(radius) * lam
    return lam


def simplex_edge_sums(u: DiscreteDeformation, metric, t: Triangulation, reversed=False):
    """Direct per-simplex sums ``eps^n sum_j (|du_j| / (eps |A B e_j|) - 1)^2`` along the chain.

    Independent of the P1 gradient; used to cross-check the simplex identity.
    """
    n = t.dim
    nodes = t.simplex_vertices()
    vals = u.lookup(nodes)
    perms = t.simplex_perms()
    B = t.basis.astype(float)
    eps = t.epsilon
    out = np.zeros(len(nodes))
    X = eps * nodes.astype(float)
    for q in range(n):
        a, b = (q + 1, q) if reversed else (q, q + 1)
        d = np.linalg.norm(vals[:, b] - vals[:, a], axis=1)
        A = metric.sqrt(X[:, a])
        step = B[:, perms[:, q]].T  # (S, n)
        L = eps * np.linalg.norm(np.einsum("sab,sb->sa", A, step), axis=1)
        out += (d / L - 1.0) ** 2
    return eps**n * out


def representation_margin(B, epsilon, radius):
    """Shrinking depth for the covered cells of one family.

    The larger of ``eps sqrt(n) radius`` and the diameter of one cell, so every
    covered cell lies inside the domain and carries only defined nodal values.
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    signs = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=float)
    diam = np.max(np.linalg.norm(signs @ B.T, axis=1))
    return epsilon * max(math.sqrt(n) * radius, diam)


def family_triangulation(domain, epsilon, B, tau, radius):
    margin = representation_margin(B, epsilon, radius)
    cells = covered_cells(domain, epsilon, B, tau, margin=margin)
    return Triangulation(epsilon, B, tau, cells), margin


def _integral(u, metric, t, reversed=False, radius=None):
    """Sum over simplices of ``W(grad u lam) * volume`` (a list, for compensated summation)."""
    if t.n_simplices == 0:
        return 0.0
    fld = extend_p1(u, t)
    lam = lambda_field(metric, t, reversed=reversed, radius=radius)
    vals = W(fld.gradients @ lam) * t.simplex_volume()
    return math.fsum(vals)


@dataclass(frozen=True)
class EnergyReport:
    epsilon: float
    E: float
    I: float
    gap: float
    boundary_bound: float
    layer_width: float
    shells: Tuple[Tuple[int, float], ...] = field(default=())

    def as_row(self):
        row = {"epsilon": self.epsilon, "E": self.E, "I": self.I, "gap": self.gap, "bound": self.boundary_bound}
        for r2, c in self.shells:
            row[f"shell_{r2}"] = c
        return row


def segments_meet(region, a, b, tol=0.0):
    """Whether each closed segment ``[a, b]`` meets the open convex region shrunk by ``tol``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if region.inradius() <= tol:
        return np.zeros(len(a), dtype=bool)
    N, c = region.halfspaces()
    c = c - tol
    na = a @ N.T
    nd = (b - a) @ N.T
    slack = c - na
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = slack / nd
    lower = np.where(nd < 0, ratio, -np.inf).max(axis=1)
    upper = np.where(nd > 0, ratio, np.inf).min(axis=1)
    parallel_ok = np.all((nd != 0) | (slack > 0), axis=1)
    return parallel_ok & (lower < upper) & (lower < 1.0) & (upper > 0.0)


def boundary_bound(energy: DiscreteEnergy, u, domain, width):
    """Sum of the interaction terms whose segment does not meet the interior of ``domain`` shrunk by ``width``.

    A relative tolerance of ``1e-9 eps`` is added to the width so that
    segments grazing the shrunken domain are always counted in the layer.
    """
    if len(energy) == 0:
        return 0.0
    eps = energy.epsilon
    inner = shrink(domain, width)
    a = eps * energy.start.astype(float)
    b = eps * (energy.start + energy.xi).astype(float)
    layer = ~segments_meet(inner, a, b, tol=1e-9 * eps)
    return math.fsum(energy.terms(u)[layer])


def _resolve_workers(workers):
    if workers is None:
        workers = int(os.environ.get("PRESTRAINED_WORKERS", "1") or 1)
    return max(1, int(workers))


def integral_representation(u: DiscreteDeformation, metric, cutoff: Cutoff, domain,
                            workers: Optional[int] = None, radius_scaled=False) -> EnergyReport:
    """Lattice energy, its integral representation, the gap and the boundary-layer bound.

    Every shell of the cutoff contributes

        psi * sum_zeta 1/(n! n k) sum_B n!/|det B| sum_tau integral W(grad u lam)

    with ``tau`` over ``{0}`` and the translation set of ``B``.  Family
    integrals are summed in a fixed order, so the result does not depend on
    ``workers``.  ``radius_scaled=True`` multiplies ``lam`` by the interaction
    length, which breaks the exactness of the representation and is only
    offered for comparison.
    """
    eps = u.epsilon
    n = u.dim
    energy = DiscreteEnergy(u, metric, cutoff, domain)
    E = energy(u)
    tasks = []
    width = 0.0
    for r2, psi, shell in cutoff.shells(n):
        radius = math.sqrt(r2)
        for zeta in shell:
            k = sum(1 for v in zeta if v)
            for fam in lattice_set(zeta):
                weight = psi / (math.factorial(n) * n * k) * math.factorial(n) / abs(fam.det)
                for tau in fam.shifts:
                    tasks.append((r2, weight, fam.basis, tau, radius))
                    width = max(width, representation_margin(fam.basis, eps, radius))

    def run(task):
        r2, weight, B, tau, radius = task
        t, _ = family_triangulation(domain, eps, B, tau, radius)
        return weight * _integral(u, metric, t, radius=radius if radius_scaled else None)

    workers = _resolve_workers(workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, tasks))
    else:
        parts = [run(task) for task in tasks]
    per_shell = {}
    for (r2, *_), v in zip(tasks, parts):
        per_shell.setdefault(r2, []).append(v)
    shells = tuple((r2, math.fsum(v)) for r2, v in per_shell.items())
    I = math.fsum(parts)
    bound = boundary_bound(energy, u, domain, width)
    return EnergyReport(eps, E, I, E - I, bound, width, shells)


def nearest_representation(u: DiscreteDeformation, metric, domain):
    """Nearest-neighbour representation on the canonical lattice with forward and reversed fields.

    ``integral over U of W(grad u lam) + W(grad u lam_bar)``, with ``U`` the
    union of cells meeting the domain shrunk by ``eps sqrt(n)``.
    """
    n = u.dim
    eps = u.epsilon
    I = np.eye(n, dtype=np.int64)
    cells = covered_cells(domain, eps, I, None, margin=eps * math.sqrt(n))
    t = Triangulation(eps, I, np.zeros(n, dtype=np.int64), cells)
    return _integral(u, metric, t) + _integral(u, metric, t, reversed=True)


def next_nearest_representation_2d(u: DiscreteDeformation, metric, domain, literal=False):
    """Diagonal-interaction representation in 2D on ``eps B0 Z^2`` and ``eps (e_1 + B0 Z^2)``.

    ``1/2 sum_tau integral over U^tau of W(grad u^tau lam^tau) + W(grad u^tau lam_bar^tau)``.

    ``literal=True`` evaluates the printed variant instead: both fields carry
    the factor ``sqrt 2`` and the first integral uses the shifted lattice's
    interpolant with its reversed field, restricted (by simplex centroid) to
    the cells of the unshifted lattice.  It is not expected to match the
    lattice energy.
    """
    eps = u.epsilon
    margin = 2.0 * eps
    taus = (np.array([0, 0]), np.array([1, 0]))
    tris = [Triangulation(eps, B0, tau, covered_cells(domain, eps, B0, tau, margin=margin)) for tau in taus]
    if not literal:
        return 0.5 * math.fsum(_integral(u, metric, t) + _integral(u, metric, t, reversed=True) for t in tris)
    r = math.sqrt(2.0)
    t0, t1 = tris
    first = _integral(u, metric, t0, radius=r)
    second = _integral(u, metric, t1, radius=r) + _integral(u, metric, t1, reversed=True, radius=r)
    # u^1 lam_bar^1 integrated over the cells of the unshifted lattice
    fld = extend_p1(u, t1)
    lam = lambda_field(metric, t1, reversed=True, radius=r)
    vals = W(fld.gradients @ lam) * t1.simplex_volume()
    cent = eps * fld.nodes.mean(axis=1)
    inv = np.linalg.inv(B0.astype(float))
    owner = np.floor(cent / eps @ inv.T + 1e-12).astype(np.int64)
    in_u0 = {tuple(c) for c in t0.cells.tolist()}
    mask = np.array([tuple(c) in in_u0 for c in owner.tolist()], dtype=bool)
    cross = math.fsum(vals[mask]) if len(vals) else 0.0
    return 0.5 * (first + cross) + 0.5 * second


