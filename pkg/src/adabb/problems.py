"""Test objectives with analytic constants where they exist."""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import NoConvergenceWarning


def power_iteration(matvec: Callable[[np.ndarray], np.ndarray], n: int, tol: float = 1e-10,
                    max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD operator.

    Iterates until the relative eigen-residual ``||Av - rho v|| / rho`` drops
    below ``tol``. If ``max_iter`` is reached the best Rayleigh quotient is
    returned and a :class:`NoConvergenceWarning` is emitted.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        rho = float(v @ w)
        if not np.any(w):
            # random start almost surely avoids the null space unless the operator is zero
            return 0.0
        if np.linalg.norm(w - rho * v) <= tol * abs(rho):
            return rho
        v = w / np.linalg.norm(w)
    warnings.warn(f"power iteration stopped after {max_iter} iterations", NoConvergenceWarning, stacklevel=2)
    return rho


def secant_lipschitz_estimate(gradient: Callable[[np.ndarray], np.ndarray], center, n_starts: int = 8,
                               power_steps: int = 60, radius: float = 1.0, seed: int = 0) -> float:
    """Largest secant ratio ``||grad(x + h d) - grad(x)|| / h`` found by finite-difference power steps.

    From random base points near ``center`` the direction ``d`` is replaced by
    the normalized gradient difference, which turns it toward the direction of
    largest local curvature. The result is a lower estimate of the smoothness
    constant, used to validate an analytic or power-iteration value.
    """
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=np.float64)
    best = 0.0
    for start in range(n_starts):
        x = center if start == 0 else center + radius * rng.standard_normal(center.size)
        gx = gradient(x)
        d = rng.standard_normal(center.size)
        d /= np.linalg.norm(d)
        h = 1e-4 * max(radius, 1e-8)
        for _ in range(power_steps):
            y = gradient(x + h * d) - gx
            ny = float(np.linalg.norm(y))
            if ny == 0.0:
                break
            best = max(best, ny / h)
            d = y / ny
    return best


def certify_lipschitz(problem, L: Optional[float] = None, center=None, rtol: float = 1e-6,
                      seed: int = 0) -> float:
    """Return ``L`` (default ``problem.lipschitz_hint``) after checking it against secant ratios.

    Raises ValueError if a sampled gradient ratio exceeds ``L`` beyond ``rtol``.
    """
    L = problem.lipschitz_hint if L is None else float(L)
    if L is None or not L > 0:
        raise ValueError("no positive Lipschitz constant to certify")
    center = np.zeros(problem.n) if center is None else center
    est = secant_lipschitz_estimate(problem.gradient, center, seed=seed)
    if est > L * (1.0 + rtol):
        raise ValueError(f"secant ratio {est:.17g} exceeds claimed constant {L:.17g}")
    return L


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class QuadraticProblem:
    """``f(x) = x'Ax/2 - b'x`` with ``A`` symmetric PSD (dense matrix or diagonal vector)."""

    def __init__(self, A, b, mu: Optional[float] = None):
        A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.diagonal = A.ndim == 1
        self.A = A
        if self.diagonal:
            eig = A
        else:
            if not np.allclose(A, A.T):
                raise ValueError("A must be symmetric")
            eig = np.linalg.eigvalsh(A)
        if eig.min() < -1e-12 * max(1.0, abs(eig.max())):
            raise ValueError("A must be positive semidefinite")
        self.lipschitz_hint = float(eig.max())
        self.mu = float(eig.min()) if mu is None else float(mu)
        self.n = self.b.size

    def _apply(self, x):
        return self.A * x if self.diagonal else self.A @ x

    def value(self, x):
        return float(0.5 * x @ self._apply(x) - self.b @ x)

    def gradient(self, x):
        return self._apply(x) - self.b

    def solution(self) -> np.ndarray:
        """Minimum-norm minimizer; requires ``b`` in the range of ``A``."""
        if self.diagonal:
            safe = np.where(self.A > 0, self.A, 1.0)
            if np.any((self.A == 0) & (self.b != 0)):
                raise ValueError("objective is unbounded below")
            return np.where(self.A > 0, self.b / safe, 0.0)
        x, *_ = np.linalg.lstsq(self.A, self.b, rcond=None)
        if np.linalg.norm(self.A @ x - self.b) > 1e-8 * max(1.0, np.linalg.norm(self.b)):
            raise ValueError("objective is unbounded below")
        return x


def random_quadratic(n: int, mu: float, L: float, seed: int = 0) -> QuadraticProblem:
    """Quadratic with spectrum spread log-uniformly on ``[mu, L]`` (endpoints included).

    With ``mu = 0`` the spectrum is linear on ``[0, L]`` and ``b`` is drawn from
    the range of ``A`` so that a minimizer exists.
    """
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if mu > 0:
        eig = np.geomspace(mu, L, n)
    else:
        eig = np.linspace(mu, L, n)
    A = (Q * eig) @ Q.T
    A = 0.5 * (A + A.T)
    b = rng.standard_normal(n)
    if mu <= 0:
        b = A @ b
    prob = QuadraticProblem(A, b)
    prob.lipschitz_hint = float(L)
    prob.mu = float(mu)
    return prob


class LogisticProblem:
    """Regularized logistic loss averaged over ``m`` samples, labels in {0, 1}.

    ``lipschitz_hint`` is ``lambda_max(A'A)/(4m) + gamma``, the constant of the
    loss as implemented (with its ``1/m`` factor). ``unnormalized_constant`` keeps the
    unnormalized ``lambda_max(A'A)/4 + gamma`` for comparison.
    """

    def __init__(self, A, y, gamma: float = 0.0):
        self.A = A.tocsr() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.A.shape[0] != self.y.size:
            raise ValueError("label count must equal row count")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("labels must be 0 or 1")
        self.gamma = float(gamma)
        self.m, self.n = self.A.shape

    @functools.cached_property
    def gram_lambda_max(self) -> float:
        """Largest eigenvalue of ``A'A``."""
        A = self.A
        return power_iteration(lambda v: A.T @ (A @ v), self.n, tol=1e-12, max_iter=100_000)

    @property
    def lipschitz_hint(self) -> float:
        return self.loss_constant + self.gamma

    @property
    def loss_constant(self) -> float:
        """Smoothness constant of the unregularized loss, ``lambda_max(A'A)/(4m)``."""
        return self.gram_lambda_max / (4.0 * self.m) if self.m else 0.0

    @property
    def unnormalized_constant(self) -> float:
        return self.gram_lambda_max / 4.0 + self.gamma

    def value(self, x):
        reg = 0.5 * self.gamma * (x @ x)
        if not self.m:
            return float(reg)
        z = self.A @ x
        return float(np.mean(np.logaddexp(0.0, z) - self.y * z) + reg)

    def gradient(self, x):
        if not self.m:
            return self.gamma * x
        z = self.A @ x
        return self.A.T @ (sigmoid(z) - self.y) / self.m + self.gamma * x

    def hessian(self, x) -> np.ndarray:
        if not self.m:
            return self.gamma * np.eye(self.n)
        s = sigmoid(self.A @ x)
        w = s * (1.0 - s) / self.m
        A = self.A
        if sp.issparse(A):
            H = (A.T @ sp.diags(w) @ A).toarray()
        else:
            H = (A.T * w) @ A
        return H + self.gamma * np.eye(self.n)


def synthetic_logistic(m: int = 500, n: int = 50, seed: int = 0, gamma: Optional[float] = None) -> LogisticProblem:
    """Gaussian design with labels drawn from a planted logistic model.

    With ``gamma=None`` the regularizer follows the ``gamma = L/m`` rule, ``L``
    being the loss constant without regularization.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    w = rng.standard_normal(n) / math.sqrt(n)
    y = (rng.random(m) < sigmoid(A @ w)).astype(np.float64)
    prob = LogisticProblem(A, y, 0.0)
    if gamma is None:
        gamma = prob.loss_constant / m
    prob.gamma = float(gamma)
    return prob


def gamma_from_rule(prob: LogisticProblem, rule: str) -> float:
    """Regularization from a rule string ``"L/m"``, ``"L/10m"`` or a literal number."""
    base = prob.loss_constant
    rule = rule.replace(" ", "")
    if rule == "L/m":
        return base / prob.m
    if rule == "L/10m":
        return base / (10.0 * prob.m)
    return float(rule)


def cubic_gradient(g, H, M: float, x) -> np.ndarray:
    """Gradient ``g + Hx + (M||x||/2) x`` of the cubic model."""
    return g + H @ x + 0.5 * M * np.linalg.norm(x) * x


class CubicSubproblem:
    """``g'x + x'Hx/2 + (M/6)||x||^3``; only locally smooth, so no Lipschitz hint."""

    lipschitz_hint = None

    def __init__(self, g, H, M: float):
        if not M > 0:
            raise ValueError("M must be positive")
        self.g = np.asarray(g, dtype=np.float64)
        self.H = np.asarray(H, dtype=np.float64)
        self.M = float(M)
        self.n = self.g.size

    def value(self, x):
        nx = np.linalg.norm(x)
        return float(self.g @ x + 0.5 * x @ (self.H @ x) + self.M / 6.0 * nx**3)

    def gradient(self, x):
        return cubic_gradient(self.g, self.H, self.M, x)


def build_cubic_from_logistic(logistic: LogisticProblem, x_ref, M: float) -> CubicSubproblem:
    """Cubic model of ``logistic`` around ``x_ref`` (gradient and dense Hessian there)."""
    x_ref = np.asarray(x_ref, dtype=np.float64)
    return CubicSubproblem(logistic.gradient(x_ref), logistic.hessian(x_ref), M)


class LeastSquares:
    """``||Ax - b||^2 / 2``."""

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)

    @functools.cached_property
    def lipschitz_hint(self) -> float:
        return float(np.linalg.eigvalsh(self.A.T @ self.A).max())

    def value(self, x):
        r = self.A @ x - self.b
        return float(0.5 * r @ r)

    def gradient(self, x):
        return self.A.T @ (self.A @ x - self.b)


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass(frozen=True)
class L1Norm:
    """``tau * ||x||_1``."""

    tau: float

    def value(self, x):
        return float(self.tau * np.abs(x).sum())

    def prox(self, alpha, v):
        return soft_threshold(v, alpha * self.tau)

    def subgradient(self, x, grad):
        """Element of the subdifferential at ``x`` closest to ``-grad``."""
        return np.where(x != 0, self.tau * np.sign(x), np.clip(-grad, -self.tau, self.tau))


@dataclass(frozen=True)
class ZeroFunction:
    def value(self, x):
        return 0.0

    def prox(self, alpha, v):
        return v

    def subgradient(self, x, grad):
        return np.zeros_like(x)


@dataclass
class Composite:
    """``F = smooth + regularizer`` exposing the composite-oracle surface."""

    smooth: object
    regularizer: object = field(default_factory=ZeroFunction)

    def nonsmooth_value(self, x):
        return self.regularizer.value(x)

    def prox(self, alpha, v):
        return self.regularizer.prox(alpha, v)

    def subgradient(self, x, grad):
        return self.regularizer.subgradient(x, grad)

    def value(self, x):
        return self.smooth.value(x) + self.nonsmooth_value(x)

    @property
    def lipschitz_hint(self):
        return self.smooth.lipschitz_hint


class LassoProblem(Composite):
    """``||Ax - b||^2/2 + tau ||x||_1``."""

    def __init__(self, A, b, tau: float):
        if not tau > 0:
            raise ValueError("tau must be positive")
        super().__init__(LeastSquares(A, b), L1Norm(float(tau)))
        self.A, self.b, self.tau = self.smooth.A, self.smooth.b, float(tau)
        self.n = self.A.shape[1]

    def prox_residual(self, x) -> float:
        """``||x - prox_{1*g}(x - grad f(x))||``, zero exactly at minimizers."""
        return float(np.linalg.norm(x - self.prox(1.0, x - self.smooth.gradient(x))))


def synthetic_lasso(m: int = 100, n: int = 50, nnz: int = 10, seed: int = 0,
                    tau_fraction: float = 0.1, noise: float = 0.05) -> LassoProblem:
    """Gaussian design, ``nnz``-sparse planted signal, ``tau`` a fraction of ``||A'b||_inf``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    w = np.zeros(n)
    support = rng.choice(n, size=nnz, replace=False)
    w[support] = rng.choice([-1.0, 1.0], size=nnz) * (1.0 + rng.random(nnz))
    b = A @ w + noise * rng.standard_normal(m)
    tau = tau_fraction * float(np.abs(A.T @ b).max())
    return LassoProblem(A, b, tau)
