import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from prestrained_lattice.density import Cf_radial, QW, QW_grad, W, W_grad

from oracles import quasiconvexify_oracle, w_density

finite = st.floats(-3, 3, allow_nan=False)
mats = arrays(np.float64, (2, 2), elements=finite)


def test_W_examples():
    assert W(np.eye(2)) == 0.0
    assert W(2 * np.eye(2)) == pytest.approx(2.0)
    assert W(np.diag([0.5, 1.0])) == pytest.approx(0.25)


def test_QW_examples():
    assert QW(np.diag([0.5, 0.9])) == 0.0
    assert QW(2 * np.eye(2)) == pytest.approx(2.0)
    assert QW(np.diag([0.5, 2.0])) == pytest.approx(1.0)


def test_Cf_examples():
    assert Cf_radial(np.array([1.0, 0.0])) == 0.0
    assert Cf_radial(np.array([0.0, 3.0])) == pytest.approx(4.0)
    assert Cf_radial(np.zeros(2)) == 0.0


def test_bulk_bounds():
    M = np.random.default_rng(0).uniform(-3, 3, (100000, 2, 2))
    q, w = QW(M), W(M)
    assert np.all(q >= 0) and np.all(q <= w)


@settings(max_examples=200, deadline=None)
@given(mats, mats)
def test_QW_midpoint_convex(M1, M2):
    assert QW((M1 + M2) / 2) <= (QW(M1) + QW(M2)) / 2 + 1e-12


@settings(max_examples=100, deadline=None)
@given(mats)
def test_QW_column_separable(M):
    assert QW(M) == pytest.approx(Cf_radial(M[:, 0]) + Cf_radial(M[:, 1]), abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(mats, st.floats(0, 2 * np.pi))
def test_frame_invariance(M, th):
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert W(R @ M) == pytest.approx(W(M), abs=1e-12)
    assert QW(R @ M) == pytest.approx(QW(M), abs=1e-12)


def test_W_matches_oracle_density():
    M = np.random.default_rng(1).uniform(-3, 3, (50, 3, 3))
    assert np.allclose(W(M), w_density(M))


@pytest.mark.parametrize("f,g", [(W, W_grad), (QW, QW_grad)])
def test_gradients_by_central_differences(f, g):
    rng = np.random.default_rng(2)
    for _ in range(10):
        M = rng.uniform(-2, 2, (2, 2))
        num = np.zeros_like(M)
        for idx in np.ndindex(M.shape):
            E = np.zeros_like(M)
            E[idx] = 1e-6
            num[idx] = (f(M + E) - f(M - E)) / 2e-6
        assert np.allclose(g(M), num, atol=1e-6)


def test_oracle_identity_is_zero():
    assert quasiconvexify_oracle(np.eye(2), grid=4) == 0.0


def test_oracle_compressive_column_decreases_with_grid():
    M = np.diag([0.5, 1.0])
    vals = [quasiconvexify_oracle(M, grid=g) for g in (4, 8, 16)]
    assert QW(M) == 0.0
    assert vals[0] > vals[1] > vals[2] > 0
    # boundary-layer cost of order 1/grid
    assert vals[2] < 0.6 * vals[0] and vals[2] < 0.02


def test_oracle_dominates_and_refines():
    rng = np.random.default_rng(3)
    for _ in range(4):
        M = rng.uniform(-1.5, 1.5, (2, 2))
        coarse = quasiconvexify_oracle(M, grid=4)
        fine = quasiconvexify_oracle(M, grid=16)
        assert fine >= QW(M) - 1e-9
        assert fine - QW(M) <= coarse - QW(M) + 1e-9


def test_oracle_stretched_matrix():
    val = quasiconvexify_oracle(2 * np.eye(2), grid=8)
    assert val >= 2.0 - 1e-9 and val == pytest.approx(2.0, abs=1e-9)
