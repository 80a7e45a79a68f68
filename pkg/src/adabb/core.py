"""Secant stepsizes, oracle protocols and the iterate/trace data model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol, runtime_checkable

import numpy as np

from .exceptions import DegenerateStep

# relative guard for <y, s> <= 0 detection
CURVATURE_RTOL = 1e-14


def as_vector(x, copy: bool = True) -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array."""
    v = np.array(x, dtype=np.float64, copy=copy)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _frozen(v: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if v is not None:
        v.setflags(write=False)
    return v


def secant_pair(x_prev, x_curr, g_prev, g_curr) -> tuple[np.ndarray, np.ndarray]:
    return np.subtract(x_curr, x_prev), np.subtract(g_curr, g_prev)


def short_bb(x_prev, x_curr, g_prev, g_curr) -> float:
    """Short Barzilai-Borwein stepsize ``<y, s> / ||y||^2``.

    Raises
    ------
    DegenerateStep
        If ``y = 0`` or ``<y, s>`` is not positive beyond round-off.
    """
    s, y = secant_pair(x_prev, x_curr, g_prev, g_curr)
    yy = float(y @ y)
    if yy == 0.0:
        raise DegenerateStep("gradient difference is zero")
    sy = float(y @ s)
    if sy <= CURVATURE_RTOL * math.sqrt(yy) * float(np.linalg.norm(s)):
        raise DegenerateStep(f"non-positive curvature <y, s> = {sy:.3e}")
    return sy / yy


def long_bb(x_prev, x_curr, g_prev, g_curr) -> float:
    """Long Barzilai-Borwein stepsize ``||s||^2 / <y, s>``."""
    s, y = secant_pair(x_prev, x_curr, g_prev, g_curr)
    sy = float(y @ s)
    ss = float(s @ s)
    if sy <= CURVATURE_RTOL * float(np.linalg.norm(y)) * math.sqrt(ss) or ss == 0.0:
        raise DegenerateStep(f"non-positive curvature <y, s> = {sy:.3e}")
    return ss / sy


def local_lipschitz(x_prev, x_curr, g_prev, g_curr) -> float:
    """Local curvature estimate ``||y|| / ||s||``."""
    s, y = secant_pair(x_prev, x_curr, g_prev, g_curr)
    ns = float(np.linalg.norm(s))
    if ns == 0.0:
        raise DegenerateStep("iterates coincide")
    return float(np.linalg.norm(y)) / ns


@dataclass(frozen=True)
class SecantInfo:
    """Curvature estimates from one secant pair; degenerate values map to +inf / 0."""

    lam: float
    beta: float
    lk: float

    @classmethod
    def from_pair(cls, x_prev, x_curr, g_prev, g_curr) -> "SecantInfo":
        try:
            lam = short_bb(x_prev, x_curr, g_prev, g_curr)
        except DegenerateStep:
            lam = math.inf
        try:
            beta = long_bb(x_prev, x_curr, g_prev, g_curr)
        except DegenerateStep:
            beta = math.inf
        try:
            lk = local_lipschitz(x_prev, x_curr, g_prev, g_curr)
        except DegenerateStep:
            lk = 0.0
        return cls(lam, beta, lk)


@runtime_checkable
class SmoothOracle(Protocol):
    """Value and gradient of a smooth convex function.

    ``lipschitz_hint`` is the global smoothness constant when one is known. The
    adaptive controllers never read it.
    """

    lipschitz_hint: Optional[float]

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class CompositeOracle(Protocol):
    """Smooth part plus a proximable convex term ``g``."""

    smooth: SmoothOracle

    def nonsmooth_value(self, x: np.ndarray) -> float: ...

    def prox(self, alpha: float, v: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FunctionOracle:
    """Adapter turning two callables into a :class:`SmoothOracle`."""

    fun: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_hint: Optional[float] = None

    def value(self, x):
        return float(self.fun(x))

    def gradient(self, x):
        return np.asarray(self.grad(x), dtype=np.float64)


class CaseTag(str, enum.Enum):
    INIT = "Init"
    CASE_I = "CaseI"
    CASE_II = "CaseII"
    CASE_III = "CaseIII"


class StopReason(str, enum.Enum):
    MAX_ITER = "MaxIter"
    GRAD_TOL = "GradTol"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class IterateState:
    """Record of iteration ``k``.

    ``alpha_k`` is the stepsize applied at ``x`` (so ``x^{k+1} = x^k - alpha_k * ...``),
    ``lambda_k`` is the short BB estimate built from ``(x^{k-1}, x^k)`` and is
    ``None`` at ``k = 0``. For composite runs ``xi`` is the subgradient of ``g``
    at ``x`` implied by the proximal step that produced it, and ``gval`` is
    ``g(x)``; ``fval`` is always the smooth part.
    """

    k: int
    x: Optional[np.ndarray]
    grad: Optional[np.ndarray]
    fval: float
    alpha_k: float
    theta_k: float
    case_tag: CaseTag
    lambda_k: Optional[float] = None
    grad_norm: float = math.nan
    xi: Optional[np.ndarray] = None
    gval: Optional[float] = None
    grad_evals: int = 0
    value_evals: int = 0

    def __post_init__(self):
        if not self.alpha_k > 0:
            raise ValueError(f"alpha_k must be positive at k={self.k}, got {self.alpha_k}")
        if not self.theta_k >= 0:
            raise ValueError(f"theta_k must be nonnegative at k={self.k}, got {self.theta_k}")
        if (self.case_tag is CaseTag.INIT) != (self.k == 0):
            raise ValueError("case_tag is Init exactly at k = 0")
        for name in ("x", "grad", "xi"):
            _frozen(getattr(self, name))

    @property
    def objective(self) -> float:
        return self.fval if self.gval is None else self.fval + self.gval


@dataclass(frozen=True)
class RunTrace:
    """Ordered iterate records of one solver run plus run metadata."""

    states: tuple[IterateState, ...]
    controller: Any
    problem_id: str = ""
    stop_reason: StopReason = StopReason.MAX_ITER
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        for i, st in enumerate(self.states):
            if st.k != i:
                raise ValueError(f"state indices must be contiguous from 0, found {st.k} at {i}")

    @property
    def converged(self) -> bool:
        return self.stop_reason is StopReason.GRAD_TOL

    @property
    def composite(self) -> bool:
        return bool(self.states) and self.states[0].gval is not None

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k) -> IterateState:
        return self.states[k]

    @property
    def final(self) -> IterateState:
        return self.states[-1]

    @property
    def alphas(self) -> np.ndarray:
        return np.array([s.alpha_k for s in self.states])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta_k for s in self.states])

    @property
    def lambdas(self) -> np.ndarray:
        """Short BB estimates; entry 0 is NaN."""
        return np.array([math.nan if s.lambda_k is None else s.lambda_k for s in self.states])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([s.objective for s in self.states])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([s.grad_norm for s in self.states])

    def iterates(self) -> np.ndarray:
        """Stacked iterates, shape ``(len(trace), n)``."""
        xs = [s.x for s in self.states]
        if any(x is None for x in xs):
            raise ValueError("trace was recorded without iterates (record_diagnostics=False)")
        return np.vstack(xs)


def reconstruct_xi(x_prev: np.ndarray, x_next: np.ndarray, alpha: float, grad_prev: np.ndarray) -> np.ndarray:
    """Subgradient implied by a proximal step: ``(x_prev - x_next)/alpha - grad_prev``."""
    return (x_prev - x_next) / alpha - grad_prev
