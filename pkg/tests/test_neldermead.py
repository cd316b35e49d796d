import numpy as np
import pytest

from bdabench.kernels import NmParams, NumericError, nelder_mead


def test_quadratic_1d():
    res = nelder_mead(lambda w: (w[0] - 3.0) ** 2, [0.0], 200)
    assert abs(res.x[0] - 3.0) < 1e-4
    assert res.fval == (res.x[0] - 3.0) ** 2
    assert res.iterations == 200


def test_constant_objective_returns_initial_vertex():
    w0 = np.array([0.5, -1.0])
    res = nelder_mead(lambda w: 4.0, w0, 50)
    simplex = [w0] + [w0 + 0.1 * e for e in np.eye(2)]
    assert any(np.array_equal(res.x, v) for v in simplex)
    assert res.fval == 4.0


def test_sphere_improves():
    f = lambda w: float(np.sum(w * w))
    w0 = np.full(5, 1.0)
    res = nelder_mead(f, w0, 500)
    assert res.fval < f(w0)
    assert res.fval == f(res.x)


def test_best_value_non_increasing():
    rosen = lambda w: float(100 * (w[1] - w[0] ** 2) ** 2 + (1 - w[0]) ** 2)
    res = nelder_mead(rosen, [-1.2, 1.0], 300)
    h = np.array(res.history)
    assert len(h) == 300
    assert np.all(np.diff(h) <= 0)
    assert res.fval < 1e-3


def test_deterministic():
    f = lambda w: float(np.abs(w - np.arange(4)).sum())
    a = nelder_mead(f, np.zeros(4), 100)
    b = nelder_mead(f, np.zeros(4), 100)
    assert a.x.tobytes() == b.x.tobytes() and a.fval == b.fval


def test_non_finite_initial_simplex():
    with pytest.raises(NumericError):
        nelder_mead(lambda w: np.inf if w[0] > 0.05 else 0.0, [0.0], 5)


def test_argument_checks():
    with pytest.raises(ValueError):
        nelder_mead(lambda w: 0.0, [0.0], 0)
    with pytest.raises(ValueError):
        NmParams(gamma=0.5)
    with pytest.raises(ValueError):
        NmParams(rho=1.0)
