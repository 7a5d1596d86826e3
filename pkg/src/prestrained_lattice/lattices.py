"""Interaction shells, signed orbits and the sheared lattice families built from them.

A shell collects the integer directions of one interaction length.  Every
direction ``xi`` of a shell together with one of its nonzero coordinates
generates an integer basis ``B`` whose columns all have the length of ``xi``;
``{0} + translations(B)`` are the shifts needed so that the sheared lattices
``tau + B Z^n`` carry every interaction of that length.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from ._validation import check_integer_matrix, int_adjugate, int_det
from .geometry import interacting_nodes

__all__ = [
    "Shell",
    "SignedOrbit",
    "LatticeFamily",
    "enumerate_shell",
    "signed_orbit",
    "orbit_size",
    "basis_from_vector",
    "lattice_set",
    "family_count",
    "translations",
    "shell_vectors",
    "interacting_nodes",
]


@dataclass(frozen=True)
class Shell:
    radius_sq: int
    dim: int
    members: Tuple[Tuple[int, ...], ...]

    @property
    def radius(self):
        return math.sqrt(self.radius_sq)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def enumerate_shell(radius_sq, n):
    """All multisets of ``n`` nonnegative integers with squared sum ``radius_sq``.

    Members are sorted descending internally and listed in descending
    lexicographic order; an empty shell is returned when ``radius_sq`` is not
    a sum of ``n`` squares.
    """
    radius_sq = int(radius_sq)
    if radius_sq < 1:
        raise ValueError("radius_sq must be a positive integer")
    if n < 1:
        raise ValueError("dimension must be positive")
    top = math.isqrt(radius_sq)
    members = tuple(
        z for z in itertools.combinations_with_replacement(range(top, -1, -1), n)
        if sum(v * v for v in z) == radius_sq
    )
    return Shell(radius_sq, n, members)


def orbit_size(zeta):
    """Closed-form size ``2^k n! / (k_1! ... k_m!)`` of the signed-permutation orbit."""
    zeta = [abs(int(v)) for v in zeta]
    n = len(zeta)
    k = sum(1 for v in zeta if v)
    denom = math.prod(math.factorial(c) for c in Counter(zeta).values())
    return 2**k * math.factorial(n) // denom


def family_count(zeta):
    """Closed-form ``|K_zeta| = k |N_zeta|``."""
    return sum(1 for v in zeta if v) * orbit_size(zeta)


@dataclass(frozen=True)
class SignedOrbit:
    base: Tuple[int, ...]
    vectors: np.ndarray

    @property
    def expected_size(self):
        return orbit_size(self.base)

    @property
    def k(self):
        return sum(1 for v in self.base if v)

    def __len__(self):
        return len(self.vectors)


def signed_orbit(zeta):
    """Distinct signed permutations of ``zeta``, lexicographically sorted."""
    zeta = tuple(abs(int(v)) for v in zeta)
    seen = set()
    for perm in set(itertools.permutations(zeta)):
        nz = [i for i, v in enumerate(perm) if v]
        for signs in itertools.product((1, -1), repeat=len(nz)):
            v = list(perm)
            for i, s in zip(nz, signs):
                v[i] *= s
            seen.add(tuple(v))
    vectors = np.array(sorted(seen), dtype=np.int64).reshape(-1, len(zeta))
    return SignedOrbit(zeta, vectors)


def basis_from_vector(xi, pivot):
    """Integer basis generated from ``xi`` and its nonzero coordinate ``pivot`` (0-based).

    Column 0 is ``xi``.  The next ``k - 1`` columns flip the sign of one other
    nonzero coordinate each, cycling through the nonzero coordinates starting
    after ``pivot``.  The last ``n - k`` columns move the pivot entry into one
    zero slot each (zero slots in increasing order).
    """
    xi = np.asarray(xi, dtype=np.int64).ravel()
    n = len(xi)
    if not np.any(xi):
        raise ValueError("xi must be nonzero")
    if not 0 <= pivot < n or xi[pivot] == 0:
        raise ValueError("pivot must index a nonzero coordinate of xi")
    nz = [i for i in range(n) if xi[i]]
    zeros = [i for i in range(n) if not xi[i]]
    k = len(nz)
    s = nz.index(pivot)
    cols = [xi.copy()]
    for p in range(2, k + 1):
        col = xi.copy()
        col[nz[(s + p - 1) % k]] *= -1
        cols.append(col)
    for j in zeros:
        col = xi.copy()
        col[pivot] = 0
        col[j] = xi[pivot]
        cols.append(col)
    B = np.stack(cols, axis=1)
    if int_det(B) == 0:
        raise ArithmeticError(f"generated basis is singular for xi={xi.tolist()}, pivot={pivot}")
    return B


def _cube_vertices(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def translations(B):
    """Unit-scale integer points of the open cell ``B (0,1)^n`` and its upper faces, minus vertices.

    Containment is decided in exact integer arithmetic through the adjugate of
    ``B``.  For ``B = I`` the set is empty.
    """
    B = check_integer_matrix(B)
    n = B.shape[0]
    d = int_det(B)
    if d == 0:
        raise ValueError("basis matrix is singular")
    adj = np.array(int_adjugate(B), dtype=np.int64)
    if d < 0:
        adj, d = -adj, -d
    corners = _cube_vertices(n) @ B.T
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(corners.min(axis=0), corners.max(axis=0))]
    z = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, n)
    c = z @ adj.T  # cube coordinates scaled by d
    closed = np.all((c >= 0) & (c <= d), axis=1)
    interior = np.all((c > 0) & (c < d), axis=1)
    upper = np.any(c == d, axis=1)
    vertex = np.all((c == 0) | (c == d), axis=1)
    keep = closed & (interior | upper) & ~vertex
    out = z[keep]
    if len(out):
        out = out[np.lexsort(out.T[::-1])]
    return out


@dataclass(frozen=True)
class LatticeFamily:
    """A basis ``B`` generated from the direction ``xi`` and pivot coordinate."""

    basis: np.ndarray
    xi: Tuple[int, ...]
    pivot: int
    zeta: Tuple[int, ...]

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def k(self):
        return sum(1 for v in self.zeta if v)

    @cached_property
    def det(self):
        return int_det(self.basis)

    @cached_property
    def translations(self):
        return translations(self.basis)

    @property
    def shifts(self):
        """``{0} + translations``, as unit-scale integer vectors."""
        return np.vstack([np.zeros((1, self.dim), dtype=np.int64), self.translations])

    @property
    def radius_sq(self):
        return int(sum(v * v for v in self.zeta))


def lattice_set(zeta):
    """All families for ``zeta``: one per (orbit vector, nonzero coordinate), no merging."""
    zeta = tuple(abs(int(v)) for v in zeta)
    families = []
    for xi in signed_orbit(zeta).vectors:
        for pivot in np.flatnonzero(xi):
            families.append(LatticeFamily(basis_from_vector(xi, int(pivot)), tuple(int(v) for v in xi),
                                          int(pivot), zeta))
    return families


def shell_vectors(radius_sq, n):
    """Every integer vector with squared length ``radius_sq`` (union of the orbits)."""
    shell = enumerate_shell(radius_sq, n)
    if not shell.members:
        return np.zeros((0, n), dtype=np.int64)
    vecs = np.vstack([signed_orbit(z).vectors for z in shell])
    return vecs[np.lexsort(vecs.T[::-1])]
