"""scikit-learn compatible estimators driven by the adaptive stepsize solvers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .problems import Composite, L1Norm, LeastSquares, LogisticProblem, gamma_from_rule
from .solvers import RunConfig, run
from .stepsize import ControllerKind


def _add_intercept(X):
    ones = np.ones((X.shape[0], 1))
    return sp.hstack([X, ones], format="csr") if sp.issparse(X) else np.hstack([X, ones])


class AdaBBLogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression ``mean(log(1+e^z) - y z) + gamma/2 ||w||^2``.

    Parameters
    ----------
    gamma : float or str
        Regularization weight, or a rule ``"L/m"`` / ``"L/10m"``.
    controller : str
        Stepsize rule label, e.g. ``"AdaBB"``, ``"AdaBB3"``, ``"AdGD"``.
    fit_intercept : bool
        Append a constant feature (it is regularized like the others).
    """

    def __init__(self, gamma="L/m", controller="AdaBB", alpha_0=1e-10, max_iter=1000, tol=1e-8,
                 fit_intercept=False):
        self.gamma = gamma
        self.controller = controller
        self.alpha_0 = alpha_0
        self.max_iter = max_iter
        self.tol = tol
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr", dtype=np.float64)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"binary classification needs exactly two classes, got {self.classes_.size}")
        target = (y == self.classes_[1]).astype(np.float64)
        A = _add_intercept(X) if self.fit_intercept else X
        prob = LogisticProblem(A, target, 0.0)
        prob.gamma = gamma_from_rule(prob, self.gamma) if isinstance(self.gamma, str) else float(self.gamma)
        cfg = RunConfig(ControllerKind.parse(self.controller), alpha_0=self.alpha_0, max_iter=self.max_iter,
                        grad_tol=self.tol)
        trace = run(prob, np.zeros(A.shape[1]), cfg)
        w = np.array(trace.final.x)
        if self.fit_intercept:
            self.coef_, self.intercept_ = w[:-1], float(w[-1])
        else:
            self.coef_, self.intercept_ = w, 0.0
        self.n_features_in_ = X.shape[1]
        self.gamma_ = prob.gamma
        self.trace_ = trace
        self.n_iter_ = len(trace) - 1
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        return np.asarray(X @ self.coef_).ravel() + self.intercept_

    def predict_proba(self, X):
        z = self.decision_function(X)
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


class AdaPBBLasso(RegressorMixin, BaseEstimator):
    """Lasso ``||Xw - y||^2 / (2 m) + alpha ||w||_1`` solved by proximal adaptive steps.

    The scaling matches :class:`sklearn.linear_model.Lasso` without intercept.
    """

    def __init__(self, alpha=1.0, controller="AdaPBB", alpha_0=1e-10, max_iter=5000, tol=1e-10):
        self.alpha = alpha
        self.controller = controller
        self.alpha_0 = alpha_0
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        m = X.shape[0]
        # (1/2m)||Xw - y||^2 = ||(X/sqrt m) w - y/sqrt m||^2 / 2
        scale = 1.0 / np.sqrt(m)
        prob = Composite(LeastSquares(X * scale, y * scale), L1Norm(float(self.alpha)))
        cfg = RunConfig(ControllerKind.parse(self.controller), alpha_0=self.alpha_0, max_iter=self.max_iter,
                        grad_tol=self.tol)
        trace = run(prob, np.zeros(X.shape[1]), cfg)
        self.coef_ = np.array(trace.final.x)
        self.intercept_ = 0.0
        self.n_features_in_ = X.shape[1]
        self.trace_ = trace
        self.n_iter_ = len(trace) - 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_
