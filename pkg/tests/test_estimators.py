import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from plnet.estimators import BiLipNetRegressor, PLNetRegressor


def test_bilip_regressor_fit_predict_inverse():
    rng = np.random.default_rng(0)
    X = rng.uniform(-2, 2, (200, 1))
    y = np.where(X[:, 0] > 0, 2.0, -2.0)
    est = BiLipNetRegressor(depth=2, width=8, epochs=5, batch_size=50, lr=1e-2)
    est.fit(X, y)
    pred = est.predict(X)
    assert pred.shape == (200,)
    assert np.mean((pred - y) ** 2) < np.var(y)
    Y = est.transform(X[:5])
    np.testing.assert_allclose(est.inverse_transform(Y), X[:5], atol=1e-6)
    assert est.result_.mu == pytest.approx(0.1)


def test_bilip_regressor_rejects_non_square_targets():
    with pytest.raises(ValueError):
        BiLipNetRegressor(epochs=0).fit(np.zeros((10, 2)), np.zeros((10, 3)))


def test_plnet_regressor_minimum():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (300, 2))
    y = 0.5 * np.sum((X - 0.3) ** 2, axis=1)
    est = PLNetRegressor(n_layers=1, depth=2, width=16, mu=0.5, nu=2.0, epochs=20, batch_size=50, lr=1e-2)
    est.fit(X, y)
    x_star, f_star = est.global_min()
    assert np.all(est.predict(X) >= f_star - 1e-9)
    assert est.score(X, y) > 0.5


def test_plnet_regressor_conditioned():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, (100, 3))
    y = (X[:, 0] - X[:, 2]) ** 2 + X[:, 1] ** 2
    est = PLNetRegressor(n_layers=1, depth=1, width=8, condition_dim=1, cond_hidden=(8,), epochs=2, batch_size=50)
    est.fit(X, y)
    x_star, _ = est.global_min(np.array([0.3]))
    assert x_star.shape == (2,)
    assert est.predict(X).shape == (100,)


def test_sklearn_protocol():
    est = PLNetRegressor(width=4, epochs=1)
    params = est.get_params()
    assert params["width"] == 4 and clone(est).get_params() == params
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((2, 2)))
