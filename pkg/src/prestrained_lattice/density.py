"""Lattice energy density ``W``, its quasiconvex envelope ``QW`` and the radial envelope.

All functions broadcast over leading axes: ``M`` has shape ``(..., n, n)`` and
the result has shape ``(...)``.  Columns of ``M`` are the stretched edge
vectors, so every density is a sum of one-column terms.
"""

import numpy as np

__all__ = ["column_norms", "W", "QW", "Cf_radial", "W_grad", "QW_grad", "DENSITIES"]


def column_norms(M):
    M = np.asarray(M, dtype=float)
    if M.ndim < 2:
        raise ValueError("expected an array of matrices with shape (..., n, n)")
    return np.sqrt(np.einsum("...ij,...ij->...j", M, M))


def W(M):
    """Sum over columns of ``(|M e_j| - 1)^2``."""
    return np.sum((column_norms(M) - 1.0) ** 2, axis=-1)


def QW(M):
    """Closed-form quasiconvex envelope: only stretched columns (norm > 1) cost energy."""
    r = column_norms(M)
    return np.sum(np.where(r > 1.0, (r - 1.0) ** 2, 0.0), axis=-1)


def Cf_radial(xi):
    """Convex envelope of ``(|xi| - 1)^2`` on vectors: zero inside the unit ball."""
    r = np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)
    return np.where(r > 1.0, (r - 1.0) ** 2, 0.0)


def _grad(M, clip):
    M = np.asarray(M, dtype=float)
    r = column_norms(M)
    safe = np.where(r > 0, r, 1.0)
    coef = 2.0 * (r - 1.0) / safe
    if clip:
        coef = np.where(r > 1.0, coef, 0.0)
    else:
        # the norm is not differentiable at 0; use the zero subgradient there
        coef = np.where(r > 0, coef, 0.0)
    return M * coef[..., None, :]


def W_grad(M):
    """Derivative of ``W`` with respect to ``M`` (zero subgradient at vanishing columns)."""
    return _grad(M, clip=False)


def QW_grad(M):
    """Derivative of ``QW``; vanishes identically on compressed columns."""
    return _grad(M, clip=True)


DENSITIES = {"W": (W, W_grad), "QW": (QW, QW_grad)}
