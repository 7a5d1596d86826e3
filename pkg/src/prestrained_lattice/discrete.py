"""Discrete prestrained lattice energy and its analytic gradient.

The energy of nodal values ``u`` on ``epsilon Z^n`` restricted to an open
domain is

    sum_xi sum_alpha  epsilon^n psi(|xi|) (|u(alpha + eps xi) - u(alpha)| / (eps |A(alpha) xi|) - 1)^2

over interaction vectors ``xi`` with ``psi > 0`` and nodes ``alpha`` whose
segment ``[alpha, alpha + eps xi]`` lies in the domain.
"""

import math
from typing import Mapping

import numpy as np

from ._validation import check_positive
from .geometry import interacting_nodes, lattice_nodes
from .lattices import enumerate_shell, shell_vectors

__all__ = ["Cutoff", "DiscreteDeformation", "DiscreteEnergy", "discrete_energy"]


class Cutoff:
    """Finitely supported interaction weights ``psi``, keyed by squared length ``|xi|^2``."""

    def __init__(self, weights: Mapping[int, float]):
        clean = {}
        for r2, w in dict(weights).items():
            if int(r2) != r2 or r2 < 1:
                raise ValueError(f"squared radius must be a positive integer, got {r2!r}")
            w = float(w)
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"weight for radius_sq={r2} must be finite and nonnegative")
            if w > 0:
                clean[int(r2)] = w
        if not clean:
            raise ValueError("cutoff has no positive weights")
        self.weights = dict(sorted(clean.items()))

    @classmethod
    def nearest(cls, weight=1.0):
        return cls({1: weight})

    @classmethod
    def next_nearest(cls, weight=1.0):
        return cls({2: weight})

    @classmethod
    def nearest_and_next(cls, w1=1.0, w2=1.0):
        return cls({1: w1, 2: w2})

    def __repr__(self):
        return f"Cutoff({self.weights})"

    def __eq__(self, other):
        return isinstance(other, Cutoff) and self.weights == other.weights

    @property
    def max_range(self):
        return math.sqrt(max(self.weights))

    def shells(self, n):
        """``(radius_sq, weight, Shell)`` for every radius with at least one lattice vector."""
        out = []
        for r2, w in self.weights.items():
            shell = enumerate_shell(r2, n)
            if shell.members:
                out.append((r2, w, shell))
        return out

    def vectors(self, n):
        """All interaction vectors and their weights, grouped by radius."""
        xs, ws = [], []
        for r2, w in self.weights.items():
            v = shell_vectors(r2, n)
            xs.append(v)
            ws.append(np.full(len(v), w))
        return np.vstack(xs), np.concatenate(ws)


class DiscreteDeformation:
    """Nodal values on ``epsilon Z^n``; ``nodes`` are integer indices, ``values`` shape ``(K, m)``."""

    def __init__(self, epsilon, nodes, values):
        self.epsilon = check_positive(epsilon, "epsilon")
        nodes = np.asarray(nodes, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 2 or len(nodes) == 0:
            raise ValueError("nodes must be a nonempty (K, n) integer array")
        if values.ndim == 1:
            values = values[:, None]
        if len(values) != len(nodes):
            raise ValueError("one value per node is required")
        if not np.all(np.isfinite(values)):
            raise ValueError("nodal values must be finite")
        self.nodes = nodes
        self.values = values
        self._lo = nodes.min(axis=0)
        shape = tuple(nodes.max(axis=0) - self._lo + 1)
        grid = np.full(shape, -1, dtype=np.int64)
        pos = tuple((nodes - self._lo).T)
        grid[pos] = np.arange(len(nodes))
        if np.count_nonzero(grid >= 0) != len(nodes):
            raise ValueError("duplicate nodes")
        self._grid = grid

    @classmethod
    def from_map(cls, domain, epsilon, func):
        nodes = lattice_nodes(domain, epsilon)
        if len(nodes) == 0:
            raise ValueError("no lattice nodes inside the domain")
        return cls(epsilon, nodes, func(epsilon * nodes.astype(float)))

    @classmethod
    def identity(cls, domain, epsilon):
        return cls.from_map(domain, epsilon, lambda x: x)

    def with_values(self, values):
        out = object.__new__(DiscreteDeformation)
        out.__dict__.update(self.__dict__)
        values = np.asarray(values, dtype=float).reshape(self.values.shape)
        out.values = values
        return out

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def points(self):
        return self.epsilon * self.nodes.astype(float)

    def __len__(self):
        return len(self.nodes)

    def index(self, idx, strict=True):
        """Row positions of integer nodes ``idx`` (shape ``(..., n)``); ``-1`` or ``KeyError`` if absent."""
        idx = np.asarray(idx, dtype=np.int64)
        rel = idx - self._lo
        shape = np.array(self._grid.shape)
        ok = np.all((rel >= 0) & (rel < shape), axis=-1)
        out = np.full(idx.shape[:-1], -1, dtype=np.int64)
        if np.any(ok):
            out[ok] = self._grid[tuple(rel[ok].T)]
        if strict and np.any(out < 0):
            missing = idx[out < 0][0]
            raise KeyError(f"missing nodal value at lattice index {missing.tolist()}")
        return out

    def lookup(self, idx):
        return self.values[self.index(idx)]


class DiscreteEnergy:
    """Precomputed interaction list for one lattice, metric, cutoff and domain.

    Evaluating on new nodal values only needs the differences along the stored
    pairs, which keeps minimization cheap.
    """

    def __init__(self, template: DiscreteDeformation, metric, cutoff: Cutoff, domain):
        eps = template.epsilon
        n = template.dim
        if metric.dim != n or domain.dim != n:
            raise ValueError("dimension mismatch between deformation, metric and domain")
        self.epsilon = eps
        self.template = template
        starts, xis, ii, jj, wts, lens = [], [], [], [], [], []
        xs, ws = cutoff.vectors(n)
        for xi, w in zip(xs, ws):
            alpha = interacting_nodes(xi, eps, domain)
            if len(alpha) == 0:
                continue
            ii.append(template.index(alpha))
            jj.append(template.index(alpha + xi))
            A = metric.sqrt(eps * alpha.astype(float))
            lens.append(eps * np.linalg.norm(A @ xi.astype(float), axis=-1))
            wts.append(np.full(len(alpha), w * eps**n))
            starts.append(alpha)
            xis.append(np.broadcast_to(xi, alpha.shape))
        if ii:
            self.i = np.concatenate(ii)
            self.j = np.concatenate(jj)
            self.weight = np.concatenate(wts)
            self.length = np.concatenate(lens)
            self.start = np.vstack(starts)
            self.xi = np.vstack(xis)
        else:
            self.i = self.j = np.zeros(0, dtype=np.int64)
            self.weight = self.length = np.zeros(0)
            self.start = self.xi = np.zeros((0, n), dtype=np.int64)

    def __len__(self):
        return len(self.i)

    def _values(self, u):
        U = u.values if isinstance(u, DiscreteDeformation) else np.asarray(u, dtype=float)
        return U.reshape(len(self.template), -1)

    def residuals(self, u):
        U = self._values(u)
        r = np.linalg.norm(U[self.j] - U[self.i], axis=1)
        return r / self.length - 1.0

    def terms(self, u):
        """Per-interaction contributions ``eps^n psi (r / L - 1)^2``."""
        return self.weight * self.residuals(u) ** 2

    def __call__(self, u):
        return float(np.sum(self.terms(u)))

    def value_and_grad(self, u, eta=0.0):
        """Energy and its gradient with respect to the nodal values.

        ``eta > 0`` replaces ``|d|`` by ``sqrt(|d|^2 + eta^2)`` so coincident
        neighbours do not produce a singular gradient.
        """
        U = self._values(u)
        d = U[self.j] - U[self.i]
        r = np.sqrt(np.einsum("ij,ij->i", d, d) + eta * eta)
        res = r / self.length - 1.0
        value = float(np.sum(self.weight * res**2))
        coef = np.divide(2.0 * self.weight * res / self.length, r, out=np.zeros_like(r), where=r > 0)
        g = coef[:, None] * d
        grad = np.zeros_like(U)
        np.add.at(grad, self.j, g)
        np.add.at(grad, self.i, -g)
        return value, grad


def discrete_energy(u: DiscreteDeformation, metric, cutoff: Cutoff, domain):
    """Exact lattice energy of ``u`` (see the module docstring)."""
    return DiscreteEnergy(u, metric, cutoff, domain)(u)
