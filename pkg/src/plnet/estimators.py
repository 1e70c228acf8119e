"""scikit-learn style wrappers around the training harness."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bilip import BiLipModel, ConditionedBiLipModel, g_forward, g_inverse
from .harness.data import Dataset
from .harness.train import TrainConfig, train
from .pl import PLNet, anchor_minimum, f_eval, global_min, inflate_box
from .solvers import SolverConfig


def _box(X: np.ndarray) -> np.ndarray:
    return np.stack([X.min(axis=0), X.max(axis=0)], axis=1)


class _FitParams:
    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, peak_lr=self.lr, seed=self.random_state)

    def _widths(self):
        return (self.width,) * self.depth


class BiLipNetRegressor(_FitParams, RegressorMixin, TransformerMixin, BaseEstimator):
    """Fits a certified ``(mu, nu)``-bi-Lipschitz map ``R^n -> R^n``.

    ``y`` must have as many columns as ``X`` (a 1-D ``y`` is allowed when
    ``X`` has one column). ``transform`` is the fitted map and
    ``inverse_transform`` its exact inverse.
    """

    def __init__(self, n_layers=1, depth=8, width=32, mu=0.1, nu=10.0, activation="relu", orthogonal=True,
                 epochs=100, batch_size=256, lr=1e-2, random_state=0, tol=1e-8):
        self.n_layers = n_layers
        self.depth = depth
        self.width = width
        self.mu = mu
        self.nu = nu
        self.activation = activation
        self.orthogonal = orthogonal
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.random_state = random_state
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        Y = y.reshape(len(y), -1)
        if Y.shape[1] != X.shape[1]:
            raise ValueError(f"y has {Y.shape[1]} columns but X has {X.shape[1]}; the map must be square")
        model = BiLipModel.build(X.shape[1], self.n_layers, self._widths(), self.mu, self.nu, self.activation,
                                 self.orthogonal, seed=self.random_state)
        model.domain = _box(X)
        data = Dataset("estimator", X, Y, _box(X), self.random_state)
        self.model_, self.result_ = train(model, data, self._train_config())
        self.n_features_in_ = X.shape[1]
        self._y_1d = y.ndim == 1
        return self

    def _check(self, X):
        check_is_fitted(self, "model_")
        return check_array(X)

    def predict(self, X):
        X = self._check(X)
        out = g_forward(self.model_, X)
        return out[:, 0] if self._y_1d else out

    def transform(self, X):
        X = self._check(X)
        return g_forward(self.model_, X)

    def inverse_transform(self, Y):
        Y = self._check(Y)
        return g_inverse(self.model_, Y, SolverConfig(tol=self.tol))


class PLNetRegressor(_FitParams, RegressorMixin, BaseEstimator):
    """Fits ``f(x) = 0.5 |G(x)|^2 + c`` to scalar targets; ``global_min`` returns its minimizer.

    With ``condition_dim > 0`` the last ``condition_dim`` columns of ``X`` are a
    condition ``p`` that shifts the biases of ``G``.
    """

    def __init__(self, n_layers=2, depth=4, width=128, mu=0.04, nu=16.0, activation="relu", orthogonal=True,
                 condition_dim=0, cond_hidden=(64, 128), epochs=100, batch_size=256, lr=5e-3, random_state=0, tol=1e-8):
        self.n_layers = n_layers
        self.depth = depth
        self.width = width
        self.mu = mu
        self.nu = nu
        self.activation = activation
        self.orthogonal = orthogonal
        self.condition_dim = condition_dim
        self.cond_hidden = cond_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.random_state = random_state
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        k = self.condition_dim
        n = X.shape[1] - k
        if n < 1:
            raise ValueError(f"X has {X.shape[1]} columns, fewer than condition_dim + 1")
        g = BiLipModel.build(n, self.n_layers, self._widths(), self.mu, self.nu, self.activation, self.orthogonal,
                             seed=self.random_state)
        box = _box(X[:, :n])
        cond_box = _box(X[:, n:]) if k else None
        if k:
            g = ConditionedBiLipModel(g, k, self.cond_hidden, seed=self.random_state)
        net = PLNet(g, float(np.min(y)), inflate_box(box), cond_box)
        if not k:
            net = anchor_minimum(net, X[int(np.argmin(y))])
        data = Dataset("estimator", X, y[:, None], box, self.random_state, k, cond_box)
        self.model_, self.result_ = train(net, data, self._train_config())
        self.n_features_in_ = X.shape[1]
        return self

    def _split(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        n = X.shape[1] - self.condition_dim
        return X[:, :n], (X[:, n:] if self.condition_dim else None)

    def predict(self, X):
        x, p = self._split(X)
        return f_eval(self.model_, x, p)

    def global_min(self, p=None):
        """``(x*, f*)``; pass the condition ``p`` for a conditioned model."""
        check_is_fitted(self, "model_")
        return global_min(self.model_, SolverConfig(tol=self.tol), p)
