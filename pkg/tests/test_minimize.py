import math

import numpy as np
import pytest
from scipy.optimize import minimize as scipy_minimize
from sklearn.base import clone

from prestrained_lattice.discrete import Cutoff, DiscreteDeformation, DiscreteEnergy
from prestrained_lattice.geometry import Box
from prestrained_lattice.metric import bilinear_angle, constant_metric, example2_metric, identity_metric
from prestrained_lattice.minimize import (
    ContinuumMinimizer,
    DiscreteEnergyMinimizer,
    GammaStudy,
    GaugeFixing,
    gamma_study,
    lbfgs,
    minimize_continuum,
    minimize_discrete,
    richardson,
)

UNIT = Box.unit(2)


def test_lbfgs_rosenbrock():
    def fg(x):
        f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
        return f, g

    res = lbfgs(fg, np.array([-1.2, 1.0]), tol=1e-10, max_iter=2000)
    assert res.converged and np.allclose(res.x, [1, 1], atol=1e-8)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_identity_converges_immediately():
    res = minimize_discrete(identity_metric(2), Cutoff.nearest(), UNIT, 1 / 8,
                            init=DiscreteDeformation.identity(UNIT, 1 / 8))
    assert res.iterations == 0 and res.value == 0.0 and res.converged


def test_noisy_identity_relaxes_to_rigid_motion():
    rng = np.random.default_rng(0)
    eps = 1 / 8
    u0 = DiscreteDeformation.identity(UNIT, eps)
    init = u0.with_values(u0.values + 0.01 * eps * rng.standard_normal(u0.values.shape))
    res = minimize_discrete(identity_metric(2), Cutoff.nearest_and_next(), UNIT, eps, init=init)
    assert res.value < 1e-8
    # pairwise distances are preserved, so the minimizer is a rigid motion of the lattice
    P, U = u0.values, res.solution.values
    dP = np.linalg.norm(P[:, None] - P[None], axis=-1)
    dU = np.linalg.norm(U[:, None] - U[None], axis=-1)
    assert np.max(np.abs(dP - dU)) < 1e-4


def test_gauge_fixing():
    U = np.arange(6.0).reshape(3, 2)
    assert np.allclose(GaugeFixing("mean").apply(U).mean(axis=0), 0)
    assert np.allclose(GaugeFixing("node", 1).apply(U)[1], 0)
    with pytest.raises(ValueError):
        GaugeFixing("pin")


def test_minimizer_agrees_with_scipy():
    # second optimizer on the same energy, started from the same point
    rng = np.random.default_rng(1)
    eps = 1 / 4
    metric = example2_metric(*bilinear_angle(math.pi / 4, 0.3))
    cutoff = Cutoff.nearest_and_next()
    u0 = DiscreteDeformation.identity(UNIT, eps)
    init = u0.with_values(u0.values @ np.array([[1.1, 0.2], [0.0, 0.9]]).T
                          + 0.2 * eps * rng.standard_normal(u0.values.shape))
    ours = minimize_discrete(metric, cutoff, UNIT, eps, init=init, tol=1e-8)
    en = DiscreteEnergy(init, metric, cutoff, UNIT)

    def fg(x):
        f, g = en.value_and_grad(x.reshape(init.values.shape))
        return f, g.ravel()

    ref = scipy_minimize(fg, init.values.ravel(), jac=True, method="L-BFGS-B",
                         options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 10000})
    assert ours.converged
    assert ours.value <= ref.fun + 1e-9
    assert ours.value > 0


def test_continuum_minimum_zero_for_realizable_metrics():
    res = minimize_continuum(constant_metric(np.diag([4.0, 1.0])), UNIT, resolution=8)
    assert res.value <= 1e-12
    res = minimize_continuum(example2_metric(*bilinear_angle(math.pi / 4, 0.3)), UNIT, resolution=8)
    assert res.value <= 1e-12


def test_continuum_minimizer_from_stretched_start():
    res = minimize_continuum(identity_metric(2), UNIT, resolution=6, init=lambda x: 2 * x)
    assert res.converged and res.value <= 1e-10


def test_richardson_linear_error():
    eps = [1 / 8, 1 / 16]
    vals = [1 + 2 * e for e in eps]
    assert richardson(eps, vals) == pytest.approx(1.0)


def test_gamma_study_identity_all_zero():
    res = gamma_study(identity_metric(2), Cutoff.nearest(), UNIT, (1 / 4, 1 / 8), resolution=4)
    assert all(r.min_E <= 1e-24 for r in res.rows) and res.continuum == 0.0


def test_gamma_study_rejects_bad_ladder():
    with pytest.raises(ValueError):
        gamma_study(identity_metric(2), Cutoff.nearest(), UNIT, (1 / 8, 1 / 4))


def test_estimators():
    est = DiscreteEnergyMinimizer(epsilon=1 / 4)
    assert clone(est).get_params()["epsilon"] == 1 / 4
    est.fit()
    assert est.energy_ == 0.0 and est.score() == 0.0
    # the mean gauge centres the minimizer: identity minus the centre of the nodes
    assert np.allclose(est.predict([[0.75, 0.25]]), [[0.25, -0.25]])
    cm = ContinuumMinimizer(metric=constant_metric(np.diag([4.0, 1.0])), resolution=4).fit()
    assert cm.energy_ <= 1e-12
    gs = GammaStudy(epsilons=(1 / 4, 1 / 8), resolution=4).fit()
    assert abs(gs.extrapolated_) <= 1e-24 and gs.continuum_ == 0.0 and len(gs.result_.rows) == 2
