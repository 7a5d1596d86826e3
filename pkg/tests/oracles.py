"""Independent reference computations used to derive and check expected values.

Nothing here imports the package: each routine is a slow, direct version of
something the package computes in a vectorized or structured way.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import minimize


# densities ------------------------------------------------------------------


def w_density(F):
    r = np.sqrt(np.einsum("...ij,...ij->...j", F, F))
    return np.sum((r - 1.0) ** 2, axis=-1)


def w_density_grad(F):
    r = np.sqrt(np.einsum("...ij,...ij->...j", F, F))
    coef = np.where(r > 0, 2.0 * (r - 1.0) / np.where(r > 0, r, 1.0), 0.0)
    return F * coef[..., None, :]


def _square_mesh(grid):
    """Nodes and right-diagonal triangles of the unit square; interior node mask."""
    g = int(grid)
    idx = np.arange((g + 1) ** 2).reshape(g + 1, g + 1)
    p00, p10 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    p01, p11 = idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()
    interior = np.zeros((g + 1, g + 1), dtype=bool)
    interior[1:-1, 1:-1] = True
    return (p00, p10, p01, p11), interior.ravel()


def quasiconvexify_oracle(M, grid=12, f=w_density, fgrad=w_density_grad, starts=8, seed=0,
                          workers=4, return_info=False):
    """Upper bound of ``Qf(M)``: min over P1 ``phi`` (zero on the boundary) of the mean of ``f(M + grad phi)``.

    The unit square carries a ``grid x grid`` mesh, every square cut along its
    rising diagonal.  Each of ``starts`` random initial fields is relaxed with
    L-BFGS-B using the exact gradient; the smallest average wins.
    """
    M = np.asarray(M, dtype=float)
    m, n = M.shape
    if n != 2:
        raise ValueError("the oracle works on the unit square only")
    g = int(grid)
    if g < 2:
        raise ValueError("grid must be at least 2")
    h = 1.0 / g
    (p00, p10, p01, p11), interior = _square_mesh(g)
    nn = (g + 1) ** 2
    free = np.flatnonzero(interior)
    ntri = 2 * g * g

    def grads(phi):
        # lower triangle (p00, p10, p11) and upper triangle (p00, p11, p01)
        lo = np.stack([(phi[p10] - phi[p00]) / h, (phi[p11] - phi[p10]) / h], axis=-1)
        up = np.stack([(phi[p11] - phi[p01]) / h, (phi[p01] - phi[p00]) / h], axis=-1)
        return lo, up

    def fun(z):
        phi = np.zeros((nn, m))
        phi[free] = z.reshape(-1, m)
        lo, up = grads(phi)
        Flo, Fup = M + lo, M + up
        val = (f(Flo).sum() + f(Fup).sum()) / ntri
        Dlo, Dup = fgrad(Flo) / ntri, fgrad(Fup) / ntri
        gphi = np.zeros((nn, m))
        # chain rule through the difference quotients
        np.add.at(gphi, p10, Dlo[..., 0] / h)
        np.add.at(gphi, p00, -Dlo[..., 0] / h)
        np.add.at(gphi, p11, Dlo[..., 1] / h)
        np.add.at(gphi, p10, -Dlo[..., 1] / h)
        np.add.at(gphi, p11, Dup[..., 0] / h)
        np.add.at(gphi, p01, -Dup[..., 0] / h)
        np.add.at(gphi, p01, Dup[..., 1] / h)
        np.add.at(gphi, p00, -Dup[..., 1] / h)
        return val, gphi[free].ravel()

    rng = np.random.default_rng(seed)
    x0s = [rng.uniform(-1.0, 1.0, size=len(free) * m) * h * (0.25 + 0.75 * s / max(starts - 1, 1))
           for s in range(starts)]

    def run(x0):
        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": 20000, "maxfun": 40000, "gtol": 1e-12, "ftol": 1e-15})
        return float(res.fun), bool(res.success), res.message

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, x0s))
    best = min(results, key=lambda r: r[0])
    # the zero field is admissible, so the oracle never exceeds f(M)
    value = min(best[0], float(f(M)))
    if return_info:
        return value, {"converged": [r[1] for r in results], "values": [r[0] for r in results]}
    return value


# lattice combinatorics ------------------------------------------------------


def brute_shells(radius_sq, n):
    """Map ``zeta -> list of integer vectors`` with sorted absolute coordinates ``zeta``."""
    R = int(math.isqrt(radius_sq))
    out = {}
    for v in itertools.product(range(-R, R + 1), repeat=n):
        if sum(c * c for c in v) == radius_sq:
            zeta = tuple(sorted((abs(c) for c in v), reverse=True))
            out.setdefault(zeta, []).append(v)
    return out


def brute_cell_points(B):
    """Integer points of ``B [0,1)^n`` other than the origin, by scanning a bounding box."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    corners = np.array(list(itertools.product([0, 1], repeat=n)), dtype=float) @ B.T
    lo = np.floor(corners.min(axis=0)).astype(int)
    hi = np.ceil(corners.max(axis=0)).astype(int)
    Binv = np.linalg.inv(B)
    pts = []
    for p in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
        c = Binv @ np.array(p, dtype=float)
        c = np.where(np.abs(c) < 1e-12, 0.0, c)
        if np.all(c >= 0) and np.all(c < 1 - 1e-12) and any(p):
            pts.append(p)
    return sorted(pts)


# discrete energy ------------------------------------------------------------


def brute_discrete_energy(func, sqrtG, weights, eps, lower, upper):
    """Direct double loop over nodes and bond vectors on an open box.

    ``weights`` maps squared radius to the weight of that shell.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = len(lower)
    lo = np.floor(lower / eps).astype(int) - 1
    hi = np.ceil(upper / eps).astype(int) + 1

    def inside(p):
        return bool(np.all(p > lower + 1e-12 * eps) and np.all(p < upper - 1e-12 * eps))

    R = int(math.isqrt(max(weights)))
    vecs = [v for v in itertools.product(range(-R, R + 1), repeat=n) if sum(c * c for c in v) in weights]
    total = []
    for a in itertools.product(*[range(l, h + 1) for l, h in zip(lo, hi)]):
        x = eps * np.array(a, dtype=float)
        if not inside(x):
            continue
        ux = func(x)
        A = sqrtG(x)
        for v in vecs:
            y = x + eps * np.array(v, dtype=float)
            if not inside(y):
                continue  # the box is convex, so the segment is inside as well
            rest = eps * np.linalg.norm(A @ np.array(v, dtype=float))
            d = np.linalg.norm(func(y) - ux)
            total.append(weights[sum(c * c for c in v)] * eps**n * (d / rest - 1.0) ** 2)
    return math.fsum(total)


# geometry -------------------------------------------------------------------


def gaussian_curvature_fd(G, x, h=1e-3):
    """Curvature of ``E du^2 + 2F du dv + G dv^2`` from nested central differences of the
    Christoffel symbols (a different route than Brioschi's formula)."""
    x = np.asarray(x, dtype=float)

    def gam(p):
        g = G(p)
        gi = np.linalg.inv(g)
        dg = np.zeros((2, 2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            dg[:, :, k] = (G(p + e) - G(p - e)) / (2 * h)
        # Gamma^l_{ij} = 1/2 g^{lm} (d_i g_mj + d_j g_mi - d_m g_ij)
        T = np.zeros((2, 2, 2))
        for m in range(2):
            for i in range(2):
                for j in range(2):
                    T[m, i, j] = 0.5 * (dg[m, j, i] + dg[m, i, j] - dg[i, j, m])
        return np.einsum("lm,mij->lij", gi, T)

    def dgam(p, k):
        e = np.zeros(2)
        e[k] = h
        return (gam(p + e) - gam(p - e)) / (2 * h)

    C = gam(x)
    d0, d1 = dgam(x, 0), dgam(x, 1)
    dG = [d0, d1]
    # R^l_{ijk} = d_j Gamma^l_{ik} - d_k Gamma^l_{ij} + Gamma^l_{jm} Gamma^m_{ik} - Gamma^l_{km} Gamma^m_{ij}
    R = np.zeros((2, 2, 2, 2))
    for l, i, j, k in itertools.product(range(2), repeat=4):
        R[l, i, j, k] = (dG[j][l, i, k] - dG[k][l, i, j]
                         + sum(C[l, j, m] * C[m, i, k] - C[l, k, m] * C[m, i, j] for m in range(2)))
    g = G(x)
    R1212 = sum(g[0, l] * R[l, 1, 0, 1] for l in range(2))
    return R1212 / np.linalg.det(g)
