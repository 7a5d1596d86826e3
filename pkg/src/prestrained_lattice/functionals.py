"""Continuum functionals: limit bounds, closed-form Gamma-limits and the non-Euclidean energy.

Deformations are either :class:`AnalyticMap` objects (value and Jacobian
callables), :class:`P1Map` objects on a background mesh, or a precomputed
array of gradients at the quadrature points.
"""

import math

import numpy as np

from ._validation import check_matrix
from .density import QW, W
from .discrete import Cutoff
from .geometry import P1Mesh, Quadrature, regular_polygon
from .lattices import lattice_set
from .metric import lambda_nearest, lambda_shell, rotated_metric
from .representation import B0

__all__ = [
    "AnalyticMap",
    "P1Map",
    "dist2_SO",
    "limit_functional_bounds",
    "gamma_limit_F",
    "continuum_energy_E",
    "rotation_identity_check",
    "CASES",
]

CASES = ("nearest-2d", "nearest-nd", "next-nearest-2d")


class AnalyticMap:
    """A smooth deformation ``x -> u(x)`` with Jacobian ``grad u``."""

    def __init__(self, func, jacobian, dim, name="map"):
        self.func = func
        self.jacobian = jacobian
        self.dim = int(dim)
        self.name = name

    def __repr__(self):
        return f"AnalyticMap({self.name!r})"

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.jacobian(x), x.shape[:-1] + (self.dim, self.dim))

    @classmethod
    def identity(cls, n=2):
        return cls.linear(np.eye(n), name="identity")

    @classmethod
    def linear(cls, M, c=None, name="linear"):
        M = check_matrix(M)
        c = np.zeros(M.shape[0]) if c is None else np.asarray(c, dtype=float)
        return cls(lambda x: x @ M.T + c, lambda x: M, M.shape[0], name=name)

    @classmethod
    def shear(cls, amplitude=0.1):
        """``(x1 + a sin x2, x2)``."""
        a = float(amplitude)

        def func(x):
            return np.stack([x[..., 0] + a * np.sin(x[..., 1]), x[..., 1]], axis=-1)

        def jac(x):
            J = np.zeros(x.shape[:-1] + (2, 2))
            J[..., 0, 0] = 1.0
            J[..., 0, 1] = a * np.cos(x[..., 1])
            J[..., 1, 1] = 1.0
            return J
        return cls(func, jac, 2, name=f"shear({a})")

    def rotated(self, R, scale=1.0):
        """``x -> scale * u(R x)``."""
        R = check_matrix(R, n=self.dim, name="R")
        s = float(scale)
        return AnalyticMap(lambda x: s * self(x @ R.T),
                           lambda x: s * self.gradient(x @ R.T) @ R,
                           self.dim, name=f"{s}*{self.name}(R x)")


class P1Map:
    """Piecewise affine deformation given by nodal values on a background mesh."""

    def __init__(self, mesh: P1Mesh, values):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float).reshape(len(mesh.points), -1)

    @property
    def dim(self):
        return self.mesh.dim

    def gradients(self):
        return self.mesh.gradient(self.values)

    def quadrature(self):
        return Quadrature.from_mesh(self.mesh)


def _setup(u, domain=None, quadrature=None, resolution=32):
    """Quadrature points, weights and gradients of ``u`` at those points."""
    if isinstance(u, P1Map):
        if quadrature is not None:
            raise ValueError("a P1 deformation is integrated on its own mesh")
        q = u.quadrature()
        return q.points, q.weights, u.gradients()
    if quadrature is None:
        if domain is None:
            raise ValueError("either a domain or a quadrature is required")
        quadrature = Quadrature.for_domain(domain, resolution)
    if len(quadrature.weights) == 0:
        raise ValueError("quadrature on an empty domain")
    pts = quadrature.points
    if isinstance(u, np.ndarray):
        grads = u
    elif hasattr(u, "gradient"):
        grads = u.gradient(pts)
    else:
        grads = u(pts)
    grads = np.asarray(grads, dtype=float)
    if grads.shape[0] != len(pts):
        raise ValueError("gradient array does not match the quadrature points")
    return pts, quadrature.weights, grads


def limit_functional_bounds(u, metric, cutoff: Cutoff, domain=None, quadrature=None,
                            resolution=32, scaled=True):
    """Lower and upper bounds ``(I_Q, I)`` of the Gamma-limit.

    Each family ``B`` of each shell contributes with weight
    ``psi (1 + |V_B|) / (n k |det B|)`` the integral of ``QW`` (resp. ``W``)
    of ``grad u lam_B`` with ``lam_B = r B diag{|A B e_j|^{-1}}``.
    ``scaled=False`` drops the radius ``r``, matching the finite-lattice
    normalization.
    """
    pts, wts, grads = _setup(u, domain, quadrature, resolution)
    n = grads.shape[-1]
    parts_q, parts_w = [], []
    for r2, psi, shell in cutoff.shells(n):
        r = math.sqrt(r2)
        for zeta in shell:
            k = sum(1 for v in zeta if v)
            for fam in lattice_set(zeta):
                weight = psi * (1 + len(fam.translations)) / (n * k * abs(fam.det))
                M = grads @ lambda_shell(metric, pts, fam.basis, r, scaled=scaled)
                parts_q.append(weight * float(np.dot(wts, QW(M))))
                parts_w.append(weight * float(np.dot(wts, W(M))))
    return math.fsum(parts_q), math.fsum(parts_w)


def _case_lambda(metric, pts, case):
    if case in ("nearest-2d", "nearest-nd"):
        if case == "nearest-2d" and metric.dim != 2:
            raise ValueError("case 'nearest-2d' needs a two-dimensional metric")
        return lambda_nearest(metric, pts)
    if case == "next-nearest-2d":
        if metric.dim != 2:
            raise ValueError("case 'next-nearest-2d' needs a two-dimensional metric")
        return lambda_shell(metric, pts, B0, math.sqrt(2.0))
    raise ValueError(f"unsupported case {case!r}; expected one of {CASES}")


def gamma_limit_F(u, metric, domain=None, case="nearest-2d", quadrature=None, resolution=32, factor=2.0):
    """``factor * integral QW(grad u lam_case)``; the Gamma-limit uses ``factor=2``.

    ``factor=1`` gives the functionals compared with the non-Euclidean energy.
    """
    pts, wts, grads = _setup(u, domain, quadrature, resolution)
    lam = _case_lambda(metric, pts, case)
    return float(factor) * float(np.dot(wts, QW(grads @ lam)))


def dist2_SO(F):
    """Squared Frobenius distance to ``SO(n)`` from the signed singular values."""
    F = np.asarray(F, dtype=float)
    s = np.linalg.svd(F, compute_uv=False)
    target = np.ones_like(s)
    target[..., -1] = np.sign(np.linalg.det(F))
    # a singular F is at the same distance from both components
    target[..., -1] = np.where(target[..., -1] == 0, 1.0, target[..., -1])
    return np.sum((s - target) ** 2, axis=-1)


def continuum_energy_E(u, metric, domain=None, density=dist2_SO, quadrature=None, resolution=32):
    """``integral density(grad u A^{-1})``; the density must vanish on rotations."""
    n = metric.dim
    if abs(float(density(np.eye(n)))) > 1e-12:
        raise ValueError("density does not vanish at the identity")
    pts, wts, grads = _setup(u, domain, quadrature, resolution)
    Ainv = np.linalg.inv(metric.sqrt(pts))
    return float(np.dot(wts, density(grads @ Ainv)))


def _maps_onto_itself(domain, R):
    V = np.asarray(domain.vertices, dtype=float)
    W_ = V @ R  # R^{-1} = R^T for a rotation
    d = np.linalg.norm(W_[:, None, :] - V[None, :, :], axis=-1)
    return bool(np.all(d.min(axis=1) < 1e-12 * max(1.0, domain.diameter)))


def rotation_identity_check(u: AnalyticMap, metric, domain=None, resolution=16):
    """Both sides of ``F_sqrt2(u) = F1_bar(sqrt2 u o R)`` with ``R = B0 / sqrt 2``.

    ``F1_bar`` uses the pulled-back metric ``R^T G(R x) R``.  When the domain is
    invariant under ``R^T`` (the default 64-gon) both sides share one
    quadrature; otherwise the right side uses the rotated quadrature points.
    Returns ``(lhs, rhs, lhs - rhs)``.
    """
    domain = regular_polygon(64) if domain is None else domain
    R = B0 / math.sqrt(2.0)
    quad = Quadrature.for_domain(domain, resolution)
    lhs = gamma_limit_F(u, metric, case="next-nearest-2d", quadrature=quad, factor=1.0)
    v = u.rotated(R, math.sqrt(2.0))
    G1 = rotated_metric(metric, R)
    if hasattr(domain, "vertices") and _maps_onto_itself(domain, R):
        quad_r = quad
    else:
        quad_r = Quadrature(quad.points @ R, quad.weights)
    rhs = gamma_limit_F(v, G1, case="nearest-2d", quadrature=quad_r, factor=1.0)
    return lhs, rhs, lhs - rhs

