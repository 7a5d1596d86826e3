"""Input validation helpers shared by the public API."""

import numpy as np


def check_matrix(M, n=None, name="matrix"):
    """Return ``M`` as a float array of square matrices (shape ``(..., n, n)``)."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if n is not None and M.shape[-1] != n:
        raise ValueError(f"{name} must be {n}x{n}, got {M.shape[-2:]}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def check_integer_matrix(B, name="B"):
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {B.shape}")
    Bi = np.rint(B).astype(np.int64)
    if not np.array_equal(Bi, B):
        raise ValueError(f"{name} must have integer entries")
    return Bi


def check_points(x, n, name="x"):
    """Return points as a float array of shape ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != n:
        raise ValueError(f"{name} must have trailing dimension {n}, got {x.shape}")
    return x


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        cmp = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {cmp}, got {value}")
    return value


def check_symmetric(G, rtol=1e-12, name="G"):
    G = check_matrix(G, name=name)
    scale = max(np.abs(G).max(), 1.0)
    if np.abs(G - np.swapaxes(G, -1, -2)).max() > rtol * scale:
        raise ValueError(f"{name} is not symmetric")
    return G


def int_det(B):
    """Exact determinant of a small integer matrix (Laplace expansion)."""
    B = [[int(v) for v in row] for row in np.asarray(B).tolist()]
    return _det(B)


def _det(rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = 0
    for j, a in enumerate(rows[0]):
        if a == 0:
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        total += (-1) ** j * a * _det(minor)
    return total


def int_adjugate(B):
    """Exact adjugate of a small integer matrix, so that ``adj(B) @ B == det(B) * I``."""
    B = [[int(v) for v in row] for row in np.asarray(B).tolist()]
    n = len(B)
    if n == 1:
        return np.array([[1]], dtype=object)
    adj = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(B) if k != i]
            adj[j, i] = (-1) ** (i + j) * _det(minor)
    return adj
