"""Prestrain metrics ``G``, their square roots ``A`` and the derived diagonal fields.

Metric fields are plain callables ``x -> G(x)`` vectorized over leading axes of
``x``.  Two-dimensional metrics may also carry analytic first and second
derivatives, which :func:`gaussian_curvature` uses instead of finite
differences when asked to.
"""

import numpy as np
from scipy.integrate import solve_ivp

from ._validation import check_integer_matrix, check_matrix, check_points, check_positive, check_symmetric, int_det

__all__ = [
    "MetricField",
    "sqrt_spd",
    "identity_metric",
    "constant_metric",
    "pullback_metric",
    "effective_metric",
    "rotated_metric",
    "example1_metric",
    "example1_from_initial_data",
    "example2_metric",
    "bilinear_angle",
    "lambda_nearest",
    "lambda_shell",
    "gaussian_curvature",
    "brioschi",
]


def sqrt_spd(G):
    """Unique symmetric positive-definite square root, via the spectral decomposition."""
    G = check_symmetric(G)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    w, V = np.linalg.eigh(G)
    if np.any(w <= 0):
        raise ValueError("matrix is not positive definite")
    return np.einsum("...ij,...j,...kj->...ik", V, np.sqrt(w), V)


class MetricField:
    """A smooth field of symmetric positive-definite matrices.

    Parameters
    ----------
    func : callable
        Maps points of shape ``(..., n)`` to matrices of shape ``(..., n, n)``.
    dim : int
    derivatives : callable, optional
        Maps points to ``(dG, d2G)`` with ``dG[..., k, i, j] = d_k G_ij`` and
        ``d2G[..., k, l, i, j] = d_k d_l G_ij``.
    name : str, optional
    """

    def __init__(self, func, dim, derivatives=None, name=None):
        self.func = func
        self.dim = int(dim)
        self.derivatives = derivatives
        self.name = name or "metric"

    def __repr__(self):
        return f"MetricField(name={self.name!r}, dim={self.dim})"

    def __call__(self, x):
        x = check_points(x, self.dim)
        G = np.asarray(self.func(x), dtype=float)
        G = np.broadcast_to(G, x.shape[:-1] + (self.dim, self.dim))
        return check_symmetric(G)

    def sqrt(self, x):
        return sqrt_spd(self(x))

    @property
    def has_derivatives(self):
        return self.derivatives is not None


def identity_metric(n=2):
    return MetricField(lambda x: np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)), n,
                       derivatives=_zero_derivatives(n), name="identity")


def _zero_derivatives(n):
    def d(x):
        lead = x.shape[:-1]
        return np.zeros(lead + (n, n, n)), np.zeros(lead + (n, n, n, n))
    return d


def constant_metric(G, name="constant"):
    G = check_symmetric(check_matrix(G))
    sqrt_spd(G)
    n = G.shape[0]
    return MetricField(lambda x: np.broadcast_to(G, x.shape[:-1] + (n, n)), n,
                       derivatives=_zero_derivatives(n), name=name)


def pullback_metric(jacobian, dim=2, name="pullback"):
    """``G = (grad u)^T grad u`` for a map given by its Jacobian; realizable by construction."""
    def func(x):
        J = jacobian(x)
        return np.einsum("...ki,...kj->...ij", J, J)
    return MetricField(func, dim, name=name)


def effective_metric(metric):
    """``diag{|A(x) e_j|^2}``, read off the diagonal of ``G`` since ``|A e_j|^2 = G_jj``."""
    n = metric.dim

    def func(x):
        G = metric(x)
        return np.einsum("...jj,jk->...jk", G, np.eye(n))

    derivatives = None
    if metric.derivatives is not None:
        def derivatives(x):
            dG, d2G = metric.derivatives(x)
            eye = np.eye(n)
            d1 = np.einsum("...kjj,ji->...kji", dG, eye)
            d2 = np.einsum("...kljj,ji->...klji", d2G, eye)
            return d1, d2
    return MetricField(func, n, derivatives=derivatives, name=f"effective({metric.name})")


def rotated_metric(metric, R):
    """Pull-back of ``metric`` under ``x -> R x``: ``G_1(x) = R^T G(R x) R``."""
    R = check_matrix(R, n=metric.dim, name="R")

    def func(x):
        G = metric(x @ R.T)
        return np.einsum("ki,...kl,lj->...ij", R, G, R)
    return MetricField(func, metric.dim, name=f"rotated({metric.name})")


def example1_metric(a, b):
    """``G = [[1/2, 1], [1, g(x1)]]`` with ``g = 2 + a (x1 + b)^2``.

    This ``g`` solves ``g'' = g'^2 / (2 (g - 2))`` with ``g > 2``, so ``G`` is
    flat while its diagonal part ``diag{1/2, g}`` is curved.
    """
    a = check_positive(a, "a")
    b = float(b)
    return _example1_from_profile(
        lambda s: 2.0 + a * (s + b) ** 2,
        lambda s: 2.0 * a * (s + b),
        lambda s: np.full_like(s, 2.0 * a),
        name=f"example1(a={a:g}, b={b:g})",
    )


def _example1_from_profile(g, dg, d2g, name):
    def func(x):
        s = x[..., 0]
        G = np.empty(x.shape[:-1] + (2, 2))
        G[..., 0, 0] = 0.5
        G[..., 0, 1] = G[..., 1, 0] = 1.0
        G[..., 1, 1] = g(s)
        return G

    def derivatives(x):
        s = x[..., 0]
        d1 = np.zeros(x.shape[:-1] + (2, 2, 2))
        d2 = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
        d1[..., 0, 1, 1] = dg(s)
        d2[..., 0, 0, 1, 1] = d2g(s)
        return d1, d2

    metric = MetricField(func, 2, derivatives=derivatives, name=name)
    metric.profile = (g, dg, d2g)
    return metric


def example1_from_initial_data(g0, g1, method="closed", interval=(-1.0, 2.0)):
    """Example-1 metric from ``g(0) = g0 > 2``, ``g'(0) = g1 > 0``.

    ``method="closed"`` uses the exact solution ``2 + a (x1 + b)^2``;
    ``method="ode"`` integrates ``g'' = g'^2 / (2 (g - 2))`` numerically on
    ``interval`` (which must contain 0).
    """
    if not g0 > 2:
        raise ValueError("g0 must exceed 2")
    g1 = check_positive(g1, "g1")
    if method == "closed":
        return example1_metric(g1**2 / (4.0 * (g0 - 2.0)), 2.0 * (g0 - 2.0) / g1)
    if method != "ode":
        raise ValueError(f"unknown method {method!r}")
    lo, hi = interval
    if not lo < 0 < hi:
        raise ValueError("interval must contain 0")

    def rhs(_, y):
        return [y[1], y[1] ** 2 / (2.0 * (y[0] - 2.0))]

    kw = dict(method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
    fwd = solve_ivp(rhs, (0.0, hi), [g0, g1], **kw)
    bwd = solve_ivp(rhs, (0.0, lo), [g0, g1], **kw)

    def sol(s):
        s = np.asarray(s, dtype=float)
        out = np.where(s >= 0, fwd.sol(np.clip(s, 0, hi)), bwd.sol(np.clip(s, lo, 0)))
        return out

    return _example1_from_profile(
        lambda s: sol(s)[0],
        lambda s: sol(s)[1],
        lambda s: sol(s)[1] ** 2 / (2.0 * (sol(s)[0] - 2.0)),
        name=f"example1(g0={g0:g}, g1={g1:g}, ode)",
    )


def bilinear_angle(w0, c):
    """``w(x) = w0 + c x1 x2`` with its gradient and Hessian."""
    def w(x):
        return w0 + c * x[..., 0] * x[..., 1]

    def dw(x):
        return c * np.stack([x[..., 1], x[..., 0]], axis=-1)

    def d2w(x):
        H = np.zeros(x.shape[:-1] + (2, 2))
        H[..., 0, 1] = H[..., 1, 0] = c
        return H
    return w, dw, d2w


def example2_metric(w, dw=None, d2w=None, name="example2"):
    """``G = [[1, cos w], [cos w, 1]]`` for an angle field ``0 < w < pi/2``.

    Its diagonal part is the identity.  Pass ``dw`` (gradient) and ``d2w``
    (Hessian) to enable analytic curvature.
    """
    def angle(x):
        v = np.asarray(w(x), dtype=float)
        if np.any((v <= 0) | (v >= np.pi / 2)):
            raise ValueError("angle field must lie in (0, pi/2)")
        return v

    def func(x):
        cw = np.cos(angle(x))
        G = np.ones(x.shape[:-1] + (2, 2))
        G[..., 0, 1] = G[..., 1, 0] = cw
        return G

    derivatives = None
    if dw is not None and d2w is not None:
        def derivatives(x):
            v = angle(x)
            g = dw(x)
            H = d2w(x)
            d1 = np.zeros(x.shape[:-1] + (2, 2, 2))
            d2 = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
            dF = -np.sin(v)[..., None] * g
            d2F = -np.cos(v)[..., None, None] * g[..., :, None] * g[..., None, :] - np.sin(v)[..., None, None] * H
            for k in range(2):
                d1[..., k, 0, 1] = d1[..., k, 1, 0] = dF[..., k]
                for l in range(2):
                    d2[..., k, l, 0, 1] = d2[..., k, l, 1, 0] = d2F[..., k, l]
            return d1, d2
    metric = MetricField(func, 2, derivatives=derivatives, name=name)
    metric.angle = angle
    metric.angle_derivatives = (dw, d2w)
    return metric


def lambda_nearest(metric, x):
    """``diag{|A(x) e_j|^{-1}} = diag{G_jj^{-1/2}}``."""
    G = metric(check_points(x, metric.dim))
    norms = np.sqrt(np.einsum("...jj->...j", G))
    return np.einsum("...j,jk->...jk", 1.0 / norms, np.eye(metric.dim))


def lambda_shell(metric, x, B, radius, scaled=True):
    """``radius * B diag{|A(x) B e_j|^{-1}}``.

    With ``scaled=False`` the ``radius`` prefactor is dropped, which is the
    normalization under which the finite-lattice representation is exact.
    """
    B = check_integer_matrix(B)
    if int_det(B) == 0:
        raise ValueError("basis matrix is singular")
    A = metric.sqrt(check_points(x, metric.dim))
    norms = np.linalg.norm(A @ B, axis=-2)
    lam = B / norms[..., None, :]
    return float(radius) * lam if scaled else lam


def brioschi(E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu):
    """Gaussian curvature from the first fundamental form and its derivatives."""
    one = np.ones_like(np.asarray(E, dtype=float))
    M1 = np.array([
        [-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
        [Fv - 0.5 * Gu, E, F],
        [0.5 * Gv, F, G],
    ], dtype=float) * one
    M2 = np.array([
        [0.0 * one, 0.5 * Ev, 0.5 * Gu],
        [0.5 * Ev, E, F],
        [0.5 * Gu, F, G],
    ], dtype=float) * one
    M1 = np.moveaxis(M1, (0, 1), (-2, -1))
    M2 = np.moveaxis(M2, (0, 1), (-2, -1))
    return (np.linalg.det(M1) - np.linalg.det(M2)) / (E * G - F**2) ** 2


def gaussian_curvature(metric, x, h=1e-3, analytic=False):
    """Gaussian curvature of a 2D metric at points ``x`` (Brioschi formula).

    Derivatives are central differences of step ``h`` unless ``analytic`` is
    set and the metric carries analytic derivatives.
    """
    if metric.dim != 2:
        raise ValueError("Gaussian curvature needs a two-dimensional metric")
    x = check_points(x, 2)
    G0 = metric(x)
    E, F, G = G0[..., 0, 0], G0[..., 0, 1], G0[..., 1, 1]
    if analytic:
        if metric.derivatives is None:
            raise ValueError("metric has no analytic derivatives")
        d1, d2 = metric.derivatives(x)
        return brioschi(E, F, G,
                        d1[..., 0, 0, 0], d1[..., 1, 0, 0], d1[..., 0, 0, 1], d1[..., 1, 0, 1],
                        d1[..., 0, 1, 1], d1[..., 1, 1, 1],
                        d2[..., 1, 1, 0, 0], d2[..., 0, 1, 0, 1], d2[..., 0, 0, 1, 1])
    h = check_positive(h, "h")
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
    Gp1, Gm1 = metric(x + e1), metric(x - e1)
    Gp2, Gm2 = metric(x + e2), metric(x - e2)
    Gpp, Gpm = metric(x + e1 + e2), metric(x + e1 - e2)
    Gmp, Gmm = metric(x - e1 + e2), metric(x - e1 - e2)
    d1u = (Gp1 - Gm1) / (2 * h)
    d1v = (Gp2 - Gm2) / (2 * h)
    d2uu = (Gp1 - 2 * G0 + Gm1) / h**2
    d2vv = (Gp2 - 2 * G0 + Gm2) / h**2
    d2uv = (Gpp - Gpm - Gmp + Gmm) / (4 * h**2)
    return brioschi(E, F, G,
                    d1u[..., 0, 0], d1v[..., 0, 0], d1u[..., 0, 1], d1v[..., 0, 1],
                    d1u[..., 1, 1], d1v[..., 1, 1],
                    d2vv[..., 0, 0], d2uv[..., 0, 1], d2uu[..., 1, 1])
