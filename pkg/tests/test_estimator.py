import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fraceig import FractionalEigen, build_grid_1d, build_grid_2d
from fraceig.solver import dense_oracle_p2


def test_params_roundtrip():
    est = FractionalEigen(s=0.3, p=3.0, seed=4)
    params = est.get_params()
    assert params["s"] == 0.3 and params["p"] == 3.0 and params["seed"] == 4
    c = clone(est)
    assert c.get_params() == params
    est.set_params(s=0.6)
    assert est.s == 0.6


def test_fit_matches_oracle():
    g = build_grid_1d(-1, 1, 32)
    est = FractionalEigen(s=0.5, p=2.0).fit(g)
    assert est.converged_
    assert est.eigenvalue_ == pytest.approx(dense_oracle_p2(est.assembly_).lambda_min, rel=1e-8)
    assert est.n_iter_ == est.result_.iterations
    assert est.score() > -1e-6


def test_predict_piecewise_constant():
    g = build_grid_1d(0, 1, 8)
    est = FractionalEigen(s=0.4, p=2.5).fit(g)
    assert np.allclose(est.predict(g.coords), est.eigenfunction_)
    assert np.array_equal(est.predict([-0.5, 1.5]), [0.0, 0.0])
    assert est.predict([0.01])[0] == est.eigenfunction_[0]


def test_predict_2d():
    g = build_grid_2d((-1, 1, -1, 1), 0.25, "disk")
    est = FractionalEigen(s=0.5, p=2.0).fit(g)
    assert np.allclose(est.predict(g.nodes), est.eigenfunction_)
    assert est.predict([[0.99, 0.99]])[0] == 0.0


def test_odd_mode():
    est = FractionalEigen(mode="odd").fit(build_grid_1d(-1, 1, 16))
    u = est.eigenfunction_
    assert np.allclose(u, -u[::-1])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        FractionalEigen().predict([0.0])


@pytest.mark.parametrize("kw", [{"s": 1.5}, {"p": 1.0}])
def test_bad_parameters(kw):
    with pytest.raises(ValueError):
        FractionalEigen(**kw).fit(build_grid_1d(0, 1, 4))


def test_bad_input():
    with pytest.raises(TypeError):
        FractionalEigen().fit(np.linspace(0, 1, 5))
