"""Energy minimization and the discrete-to-continuum convergence study.

The optimizer is a limited-memory BFGS with Armijo backtracking.  The lattice
energy is invariant under translations, so iterates are kept in a fixed gauge
(zero mean, or one pinned node).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
from sklearn.base import BaseEstimator

from .density import QW, QW_grad
from .discrete import Cutoff, DiscreteDeformation, DiscreteEnergy
from .functionals import CASES, P1Map, _case_lambda
from .geometry import background_mesh
from .metric import identity_metric

__all__ = [
    "GaugeFixing",
    "LBFGSResult",
    "lbfgs",
    "MinimizeResult",
    "minimize_discrete",
    "minimize_continuum",
    "StudyRow",
    "StudyResult",
    "richardson",
    "gamma_study",
    "DiscreteEnergyMinimizer",
    "ContinuumMinimizer",
    "GammaStudy",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaugeFixing:
    """Removes the translation invariance: ``mode`` is ``"mean"`` or ``"node"``."""

    mode: str = "mean"
    node: int = 0

    def __post_init__(self):
        if self.mode not in ("mean", "node"):
            raise ValueError("gauge mode must be 'mean' or 'node'")

    def apply(self, U):
        U = np.asarray(U, dtype=float)
        if self.mode == "mean":
            return U - U.mean(axis=0)
        return U - U[self.node]


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    nit: int
    converged: bool
    message: str
    history: List[float] = field(default_factory=list)


def lbfgs(fun_grad, x0, tol=1e-8, max_iter=1000, memory=10, project=None, c1=1e-4, max_backtracks=60):
    """Minimize ``fun_grad(x) -> (f, g)`` until ``max |g| <= tol``.

    ``project`` maps an accepted iterate to an equivalent one (same ``f`` and
    ``g``), e.g. a gauge fix.  Accepted values never increase.
    """
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    f, g = fun_grad(x)
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite at the initial point")
    S, Y, rho = [], [], []
    history = [f]
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    it = 0
    message = "converged"
    while gnorm > tol:
        if it >= max_iter:
            message = "maximum number of iterations reached"
            break
        # two-loop recursion
        q = g.ravel().copy()
        alphas = []
        for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
            a = r * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if S:
            q *= np.dot(S[-1], Y[-1]) / np.dot(Y[-1], Y[-1])
        else:
            q *= min(1.0, 1.0 / max(np.linalg.norm(q), 1e-300))
        for (s, y, r), a in zip(zip(S, Y, rho), reversed(alphas)):
            b = r * np.dot(y, q)
            q += (a - b) * s
        d = -q
        slope = float(np.dot(g.ravel(), d))
        if not slope < 0:
            # curvature information is useless; restart from steepest descent
            S, Y, rho = [], [], []
            d = -g.ravel()
            slope = -float(np.dot(d, d))
        step = 1.0
        accepted = False
        for _ in range(max_backtracks):
            xn = x + step * d.reshape(x.shape)
            fn, gn = fun_grad(xn)
            if np.isfinite(fn) and fn <= f + c1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            message = "line search failed"
            break
        if project is not None:
            xn = project(xn)
        s = (xn - x).ravel()
        y = (gn - g).ravel()
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
            if len(S) > memory:
                S.pop(0), Y.pop(0), rho.pop(0)
        else:
            S, Y, rho = [], [], []
        x, f, g = xn, fn, gn
        history.append(f)
        gnorm = float(np.max(np.abs(g)))
        it += 1
    return LBFGSResult(x, float(f), gnorm, it, gnorm <= tol, message if gnorm > tol else "converged", history)


@dataclass
class MinimizeResult:
    value: float
    iterations: int
    grad_norm: float
    converged: bool
    message: str
    solution: object = None
    history: List[float] = field(default_factory=list)


def _default_init(metric, domain):
    x0 = np.asarray(domain.center, dtype=float)
    A0 = metric.sqrt(x0)
    return lambda x: x @ A0.T


def minimize_discrete(metric, cutoff: Cutoff, domain, epsilon, init: Optional[DiscreteDeformation] = None,
                      gauge: GaugeFixing = GaugeFixing(), tol=1e-9, max_iter=5000, eta=None):
    """Minimize the lattice energy over the nodal values.

    ``init`` defaults to ``A(x0) x`` with ``x0`` the domain center.  The norm
    is smoothed as ``sqrt(r^2 + eta^2)`` with ``eta = 1e-12 eps`` by default;
    the reported value is the unsmoothed energy.  ``tol`` bounds the max-norm
    of the gradient.
    """
    if init is None:
        init = DiscreteDeformation.from_map(domain, epsilon, _default_init(metric, domain))
    elif abs(init.epsilon - epsilon) > 1e-15 * epsilon:
        raise ValueError("initial deformation lives on a different lattice")
    energy = DiscreteEnergy(init, metric, cutoff, domain)
    eta = 1e-12 * epsilon if eta is None else float(eta)
    shape = init.values.shape

    def fg(x):
        return energy.value_and_grad(x.reshape(shape), eta=eta)

    res = lbfgs(fg, init.values, tol=tol, max_iter=max_iter, project=gauge.apply)
    u = init.with_values(res.x)
    value = energy(u)
    if not res.converged:
        log.warning("discrete minimization at eps=%g stopped: %s (grad %.3e)", epsilon, res.message, res.grad_norm)
    return MinimizeResult(value, res.nit, res.grad_norm, res.converged, res.message, u, res.history)


class _ContinuumObjective:
    def __init__(self, mesh, metric, case, delta=0.0, factor=2.0):
        self.mesh = mesh
        self.lam = _case_lambda(metric, mesh.centroids, case)
        self.vol = mesh.volumes
        self.delta = float(delta)
        self.factor = float(factor)

    def value(self, U):
        G = self.mesh.gradient(U)
        return self.factor * float(np.dot(self.vol, QW(G @ self.lam)))

    def __call__(self, x, shape):
        U = x.reshape(shape)
        G = self.mesh.gradient(U)
        M = G @ self.lam
        f = self.factor * float(np.dot(self.vol, QW(M)))
        dG = self.factor * self.vol[:, None, None] * (QW_grad(M) @ np.swapaxes(self.lam, 1, 2))
        if self.delta > 0:
            f += self.delta * float(np.dot(self.vol, np.einsum("smn,smn->s", G, G)))
            dG = dG + 2.0 * self.delta * self.vol[:, None, None] * G
        return f, self.mesh.pullback(dG)


def minimize_continuum(metric, domain, case="nearest-2d", resolution=32, tol=1e-10, max_iter=5000,
                       delta=0.0, init=None, gauge: GaugeFixing = GaugeFixing()):
    """Minimize ``2 integral QW(grad u lam)`` over P1 maps on a background mesh.

    ``delta > 0`` adds ``delta integral |grad u|^2``; the reported value never
    includes it.  ``init`` is a callable on points (default ``A(x0) x``).
    """
    if case not in CASES:
        raise ValueError(f"unsupported case {case!r}")
    mesh = background_mesh(domain, resolution)
    obj = _ContinuumObjective(mesh, metric, case, delta)
    init = _default_init(metric, domain) if init is None else init
    U0 = np.asarray(init(mesh.points), dtype=float)
    shape = U0.shape
    res = lbfgs(lambda x: obj(x, shape), U0, tol=tol, max_iter=max_iter, project=gauge.apply)
    U = res.x.reshape(shape)
    return MinimizeResult(obj.value(U), res.nit, res.grad_norm, res.converged, res.message,
                          P1Map(mesh, U), res.history)


@dataclass(frozen=True)
class StudyRow:
    epsilon: float
    min_E: float
    iterations: int
    grad_norm: float
    converged: bool
    message: str = ""


@dataclass
class StudyResult:
    rows: List[StudyRow]
    extrapolated: float
    continuum: float
    case: str

    def table(self):
        return [(r.epsilon, r.min_E, r.iterations, r.grad_norm) for r in self.rows]


def richardson(eps, values, order=1):
    """Extrapolate the last two values assuming an error ``O(eps^order)``."""
    if len(values) < 2:
        return float(values[-1]) if values else math.nan
    r = (eps[-2] / eps[-1]) ** order
    return float((r * values[-1] - values[-2]) / (r - 1.0))


def _interpolate(points, values, X):
    """Best affine fit plus P1 (Delaunay) interpolation of the residual.

    Outside the convex hull of ``points`` the residual is taken from the
    nearest node, so affine fields are reproduced exactly everywhere.
    """
    P = np.c_[points, np.ones(len(points))]
    coef, *_ = np.linalg.lstsq(P, values, rcond=None)
    resid = values - P @ coef
    X = np.asarray(X, dtype=float)
    base = np.c_[X, np.ones(len(X))] @ coef
    if points.shape[1] == 1:
        r = np.column_stack([np.interp(X[:, 0], points[:, 0], resid[:, k]) for k in range(resid.shape[1])])
        return base + r
    r = LinearNDInterpolator(points, resid)(X)
    bad = np.any(~np.isfinite(r), axis=1)
    if np.any(bad):
        r[bad] = NearestNDInterpolator(points, resid)(X[bad])
    return base + r


def _resample(u: DiscreteDeformation, domain, epsilon):
    target = DiscreteDeformation.from_map(domain, epsilon, lambda x: np.zeros_like(x))
    return target.with_values(_interpolate(u.points, u.values, target.points))


def gamma_study(metric, cutoff: Cutoff, domain, epsilons, case="nearest-2d", resolution=32,
                tol=1e-9, max_iter=5000, noise=0.0, seed=0, continuum_tol=1e-10):
    """Minimize the lattice energy along a decreasing ``epsilons`` ladder, warm-starting
    each level from the previous minimizer, and minimize the continuum limit once.

    ``noise`` adds a seeded perturbation (relative to ``eps``) to the first
    initial guess.  Failures are recorded per row; the study continues.
    """
    eps = [float(e) for e in epsilons]
    if not eps or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be a nonempty strictly decreasing sequence")
    rng = np.random.default_rng(seed)
    rows = []
    prev = None
    for e in eps:
        try:
            if prev is None:
                init = DiscreteDeformation.from_map(domain, e, _default_init(metric, domain))
                if noise:
                    init = init.with_values(init.values + noise * e * rng.standard_normal(init.values.shape))
            else:
                init = _resample(prev, domain, e)
            res = minimize_discrete(metric, cutoff, domain, e, init=init, tol=tol, max_iter=max_iter)
            prev = res.solution
            rows.append(StudyRow(e, res.value, res.iterations, res.grad_norm, res.converged, res.message))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            rows.append(StudyRow(e, math.nan, 0, math.nan, False, f"failed: {exc}"))
    cont = minimize_continuum(metric, domain, case=case, resolution=resolution, tol=continuum_tol,
                              max_iter=max_iter)
    ok = [r for r in rows if np.isfinite(r.min_E)]
    extrap = richardson([r.epsilon for r in ok], [r.min_E for r in ok])
    return StudyResult(rows, extrap, cont.value, case)


class _MetricDefaults:
    def _resolved(self):
        from .geometry import Box
        domain = self.domain if self.domain is not None else Box.unit(2)
        metric = self.metric if self.metric is not None else identity_metric(domain.dim)
        return metric, domain


class DiscreteEnergyMinimizer(_MetricDefaults, BaseEstimator):
    """Estimator wrapper: ``fit`` minimizes the lattice energy, ``predict`` interpolates the minimizer."""

    def __init__(self, metric=None, cutoff=None, domain=None, epsilon=1 / 16, tol=1e-9, max_iter=5000,
                 gauge="mean"):
        self.metric = metric
        self.cutoff = cutoff
        self.domain = domain
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter
        self.gauge = gauge

    def fit(self, X=None, y=None):
        """``X``: optional initial nodal values, one row per lattice node inside the domain."""
        metric, domain = self._resolved()
        cutoff = self.cutoff if self.cutoff is not None else Cutoff.nearest()
        init = None
        if X is not None:
            base = DiscreteDeformation.from_map(domain, self.epsilon, lambda x: x)
            init = base.with_values(np.asarray(X, dtype=float))
        res = minimize_discrete(metric, cutoff, domain, self.epsilon, init=init, gauge=GaugeFixing(self.gauge),
                                tol=self.tol, max_iter=self.max_iter)
        self.deformation_ = res.solution
        self.energy_ = res.value
        self.n_iter_ = res.iterations
        self.grad_norm_ = res.grad_norm
        self.converged_ = res.converged
        return self

    def predict(self, X):
        u = self.deformation_
        return _interpolate(u.points, u.values, np.atleast_2d(np.asarray(X, dtype=float)))

    def score(self, X=None, y=None):
        return -self.energy_


class ContinuumMinimizer(_MetricDefaults, BaseEstimator):
    """Estimator wrapper around :func:`minimize_continuum`."""

    def __init__(self, metric=None, domain=None, case="nearest-2d", resolution=32, tol=1e-10, max_iter=5000,
                 delta=0.0):
        self.metric = metric
        self.domain = domain
        self.case = case
        self.resolution = resolution
        self.tol = tol
        self.max_iter = max_iter
        self.delta = delta

    def fit(self, X=None, y=None):
        metric, domain = self._resolved()
        res = minimize_continuum(metric, domain, case=self.case, resolution=self.resolution, tol=self.tol,
                                 max_iter=self.max_iter, delta=self.delta)
        self.map_ = res.solution
        self.energy_ = res.value
        self.n_iter_ = res.iterations
        self.grad_norm_ = res.grad_norm
        self.converged_ = res.converged
        return self

    def score(self, X=None, y=None):
        return -self.energy_


class GammaStudy(_MetricDefaults, BaseEstimator):
    """Estimator wrapper around :func:`gamma_study`; ``fit`` sets ``result_``."""

    def __init__(self, metric=None, cutoff=None, domain=None, epsilons=(1 / 8, 1 / 16, 1 / 32),
                 case="nearest-2d", resolution=32, tol=1e-9, max_iter=5000, noise=0.0, seed=0):
        self.metric = metric
        self.cutoff = cutoff
        self.domain = domain
        self.epsilons = epsilons
        self.case = case
        self.resolution = resolution
        self.tol = tol
        self.max_iter = max_iter
        self.noise = noise
        self.seed = seed

    def fit(self, X=None, y=None):
        metric, domain = self._resolved()
        cutoff = self.cutoff if self.cutoff is not None else Cutoff.nearest()
        self.result_ = gamma_study(metric, cutoff, domain, self.epsilons, case=self.case,
                                   resolution=self.resolution, tol=self.tol, max_iter=self.max_iter,
                                   noise=self.noise, seed=self.seed)
        self.extrapolated_ = self.result_.extrapolated
        self.continuum_ = self.result_.continuum
        return self
