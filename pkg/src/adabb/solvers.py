"""Iteration drivers: plain gradient steps, proximal steps and line-search baselines.

Every driver records one :class:`IterateState` per visited point. The stepsize
stored in state ``k`` is the one applied at ``x^k``; for the last state it is
the stepsize that would have been applied next.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CaseTag, IterateState, RunTrace, SecantInfo, StopReason, as_vector, reconstruct_xi
from .exceptions import InvalidState, LineSearchStall, NoViableStepsize
from .stepsize import ControllerKind, Method, classify, initial_theta, next_step

LINE_SEARCH_FLOOR = 1e-30
LINE_SEARCH_CEIL = 1e30

COMPOSITE_METHODS = frozenset({Method.ADAPBB, Method.ADAPGM, Method.ADAPGM_PIR, Method.ADGD, Method.ADGD2, Method.FIXED})
PROBE_RESET_METHODS = frozenset({Method.ADGD, Method.ADGD2, Method.ADAPGM, Method.ADAPGM_PIR})


@dataclass(frozen=True)
class RunConfig:
    """Settings of one solver run.

    ``theta1_reset`` forces ``theta_1 = 1`` after the first adaptive step.
    ``alpha0_probe_reset`` makes AdGD/AdaPGM-type rules take one probe step,
    read the local curvature ``L_1`` there and restart with
    ``alpha_0 = 1/(sqrt(2) L_1)``.
    """

    controller: ControllerKind
    alpha_0: float = 1e-10
    max_iter: int = 1000
    grad_tol: float = 0.0
    record_diagnostics: bool = True
    theta1_reset: bool = False
    alpha0_probe_reset: bool = False
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    gll_window: int = 10

    def __post_init__(self):
        if isinstance(self.controller, str):
            object.__setattr__(self, "controller", ControllerKind.parse(self.controller))
        if not (self.alpha_0 > 0 and math.isfinite(self.alpha_0)):
            raise InvalidState(f"alpha_0 must be positive and finite, got {self.alpha_0}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidState(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not self.grad_tol >= 0:
            raise InvalidState(f"grad_tol must be nonnegative, got {self.grad_tol}")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack < 1:
            raise InvalidState("armijo_c and backtrack must lie in (0, 1)")
        if self.gll_window < 1:
            raise InvalidState("gll_window must be >= 1")


def _finite(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def _resolve_fixed(cfg: RunConfig, oracle) -> ControllerKind:
    kind = cfg.controller
    if kind.method is Method.FIXED and kind.alpha is None:
        L = getattr(oracle, "lipschitz_hint", None)
        if L is None or not L > 0:
            raise InvalidState("fixed-step GD without alpha needs a Lipschitz hint")
        kind = kind.with_alpha(1.0 / L)
    return kind


class _Recorder:
    """Accumulates states and oracle-call counts for one run."""

    def __init__(self, keep_arrays: bool):
        self.keep = keep_arrays
        self.states: list[IterateState] = []
        self.grad_evals = 0
        self.value_evals = 0

    def add(self, k, x, g, fval, alpha, theta, case, lam=None, grad_norm=None, xi=None, gval=None):
        if grad_norm is None:
            grad_norm = float(np.linalg.norm(g))
        keep = self.keep
        self.states.append(IterateState(
            k=k, x=x.copy() if keep else None, grad=g.copy() if keep else None, fval=fval,
            alpha_k=alpha, theta_k=theta, case_tag=case, lambda_k=lam, grad_norm=grad_norm,
            xi=xi.copy() if keep and xi is not None else None, gval=gval,
            grad_evals=self.grad_evals, value_evals=self.value_evals))

    def trace(self, kind, reason, problem_id="", **meta) -> RunTrace:
        meta.setdefault("grad_evals", self.grad_evals)
        meta.setdefault("value_evals", self.value_evals)
        return RunTrace(tuple(self.states), kind, problem_id, reason, meta)


def _probe_alpha0(oracle, x0, g0, alpha_0) -> float:
    x1 = x0 - alpha_0 * g0
    info = SecantInfo.from_pair(x0, x1, g0, oracle.gradient(x1))
    return 1.0 / (math.sqrt(2.0) * info.lk) if info.lk > 0 else alpha_0


def run_smooth(oracle, x0, cfg: RunConfig, problem_id: str = "") -> RunTrace:
    """Gradient descent ``x^{k+1} = x^k - alpha_k grad f(x^k)`` with the stepsize rule of ``cfg``."""
    kind = _resolve_fixed(cfg, oracle)
    if kind.method not in COMPOSITE_METHODS | {Method.ADABB, Method.ADABB_SC}:
        raise InvalidState(f"run_smooth does not drive {kind.method.value}")
    rec = _Recorder(cfg.record_diagnostics)
    x = as_vector(x0)
    with np.errstate(over="ignore", invalid="ignore"):
        g = oracle.gradient(x)
        f = oracle.value(x)
        rec.grad_evals += 1
        rec.value_evals += 1
        alpha_0 = kind.alpha if kind.method is Method.FIXED else cfg.alpha_0
        if np.linalg.norm(g) <= cfg.grad_tol:
            rec.add(0, x, g, f, alpha_0, initial_theta(kind, math.inf, alpha_0), CaseTag.INIT)
            return rec.trace(kind, StopReason.GRAD_TOL, problem_id, alpha_0=alpha_0, theta1_reset=cfg.theta1_reset)
        if cfg.alpha0_probe_reset and kind.method in PROBE_RESET_METHODS:
            alpha_0 = _probe_alpha0(oracle, x, g, alpha_0)
            rec.grad_evals += 1
        x_prev, g_prev, f_prev = x, g, f
        alpha, theta = alpha_0, None
        reason = StopReason.MAX_ITER
        for k in range(1, cfg.max_iter + 1):
            x = x_prev - alpha * g_prev
            g = oracle.gradient(x)
            f = oracle.value(x)
            rec.grad_evals += 1
            rec.value_evals += 1
            if not (_finite(x, g) and math.isfinite(f)):
                if k == 1:
                    rec.add(0, x_prev, g_prev, f_prev, alpha, initial_theta(kind, math.inf, alpha), CaseTag.INIT)
                reason = StopReason.NUMERICAL_FAILURE
                break
            info = SecantInfo.from_pair(x_prev, x, g_prev, g)
            if k == 1:
                theta = initial_theta(kind, info.lam, alpha)
                rec.add(0, x_prev, g_prev, f_prev, alpha, theta, CaseTag.INIT)
            step = next_step(kind, info.lam, info.beta, info.lk, alpha, theta)
            alpha, theta = step.alpha_k, step.theta_k
            if k == 1 and cfg.theta1_reset:
                theta = 1.0
            if not math.isfinite(alpha):
                reason = StopReason.NUMERICAL_FAILURE
                break
            rec.add(k, x, g, f, alpha, theta, step.case_tag, info.lam)
            x_prev, g_prev, f_prev = x, g, f
            if np.linalg.norm(g) <= cfg.grad_tol:
                reason = StopReason.GRAD_TOL
                break
    return rec.trace(kind, reason, problem_id, alpha_0=alpha_0, theta1_reset=cfg.theta1_reset)


def run_composite(oracle, x0, cfg: RunConfig, problem_id: str = "") -> RunTrace:
    """Proximal gradient ``x^{k+1} = prox_{alpha_k g}(x^k - alpha_k grad f(x^k))``.

    States carry ``xi``, the subgradient of ``g`` implied by the step that
    produced ``x^k``; at ``k = 0`` it is the subgradient closest to
    ``-grad f(x^0)`` when the oracle exposes ``subgradient`` and zero otherwise.
    ``grad_norm`` is ``||grad f(x^k) + xi^k||``. The run stops once
    ``||x^{k+1} - x^k|| / alpha_k <= grad_tol``.
    """
    kind = _resolve_fixed(cfg, oracle)
    if kind.method not in COMPOSITE_METHODS:
        raise InvalidState(f"{kind.method.value} has no proximal form")
    smooth = oracle.smooth
    rec = _Recorder(cfg.record_diagnostics)
    x = as_vector(x0)
    with np.errstate(over="ignore", invalid="ignore"):
        g = smooth.gradient(x)
        f = smooth.value(x)
        h = oracle.nonsmooth_value(x)
        rec.grad_evals += 1
        rec.value_evals += 1
        sub = getattr(oracle, "subgradient", None)
        xi = sub(x, g) if sub is not None else np.zeros_like(x)
        alpha_0 = kind.alpha if kind.method is Method.FIXED else cfg.alpha_0
        if cfg.alpha0_probe_reset and kind.method in PROBE_RESET_METHODS:
            alpha_0 = _probe_alpha0(smooth, x, g, alpha_0)
            rec.grad_evals += 1
        x_prev, g_prev, f_prev, h_prev, xi_prev = x, g, f, h, xi
        alpha, theta = alpha_0, None
        reason = StopReason.MAX_ITER
        for k in range(1, cfg.max_iter + 1):
            x = oracle.prox(alpha, x_prev - alpha * g_prev)
            g = smooth.gradient(x)
            f = smooth.value(x)
            h = oracle.nonsmooth_value(x)
            rec.grad_evals += 1
            rec.value_evals += 1
            if not (_finite(x, g) and math.isfinite(f) and math.isfinite(h)):
                if k == 1:
                    rec.add(0, x_prev, g_prev, f_prev, alpha, initial_theta(kind, math.inf, alpha), CaseTag.INIT,
                            grad_norm=float(np.linalg.norm(g_prev + xi_prev)), xi=xi_prev, gval=h_prev)
                reason = StopReason.NUMERICAL_FAILURE
                break
            xi = reconstruct_xi(x_prev, x, alpha, g_prev)
            info = SecantInfo.from_pair(x_prev, x, g_prev, g)
            if k == 1:
                theta = initial_theta(kind, info.lam, alpha)
                rec.add(0, x_prev, g_prev, f_prev, alpha, theta, CaseTag.INIT,
                        grad_norm=float(np.linalg.norm(g_prev + xi_prev)), xi=xi_prev, gval=h_prev)
            residual = float(np.linalg.norm(x - x_prev)) / alpha
            step = next_step(kind, info.lam, info.beta, info.lk, alpha, theta)
            alpha, theta = step.alpha_k, step.theta_k
            if k == 1 and cfg.theta1_reset:
                theta = 1.0
            if not math.isfinite(alpha):
                reason = StopReason.NUMERICAL_FAILURE
                break
            rec.add(k, x, g, f, alpha, theta, step.case_tag, info.lam,
                    grad_norm=float(np.linalg.norm(g + xi)), xi=xi, gval=h)
            x_prev, g_prev, f_prev, h_prev = x, g, f, h
            if residual <= cfg.grad_tol:
                reason = StopReason.GRAD_TOL
                break
    return rec.trace(kind, reason, problem_id, alpha_0=alpha_0, theta1_reset=cfg.theta1_reset)


def _line_search(oracle, x, g, f, trial, rhs_ref, c, shrink, rec):
    """Backtrack from ``trial`` until ``f(x - t g) <= rhs_ref - c t ||g||^2``."""
    gg = float(g @ g)
    t = trial
    while True:
        x_new = x - t * g
        f_new = oracle.value(x_new)
        rec.value_evals += 1
        if math.isfinite(f_new) and f_new <= rhs_ref - c * t * gg:
            return t, x_new, f_new
        t *= shrink
        if t < LINE_SEARCH_FLOOR:
            return None, None, None


def _run_line_search(oracle, x0, cfg: RunConfig, problem_id: str, nonmonotone: bool) -> RunTrace:
    kind = cfg.controller
    rec = _Recorder(cfg.record_diagnostics)
    x = as_vector(x0)
    window = cfg.gll_window if nonmonotone else 1
    with np.errstate(over="ignore", invalid="ignore"):
        g = oracle.gradient(x)
        f = oracle.value(x)
        rec.grad_evals += 1
        rec.value_evals += 1
        history = deque([f], maxlen=window)
        trial = cfg.alpha_0
        alpha_prev = None
        lam = None
        x_prev = g_prev = None
        reason = StopReason.MAX_ITER
        for k in range(cfg.max_iter + 1):
            if k > 0:
                info = SecantInfo.from_pair(x_prev, x, g_prev, g)
                lam = info.lam
                if nonmonotone:
                    trial = info.beta if math.isfinite(info.beta) else alpha_prev
                else:
                    trial = 2.0 * alpha_prev
                trial = min(max(trial, LINE_SEARCH_FLOOR), LINE_SEARCH_CEIL)
            stop = np.linalg.norm(g) <= cfg.grad_tol
            if stop or k == cfg.max_iter:
                theta = 0.0 if k == 0 else trial / alpha_prev
                case = CaseTag.INIT if k == 0 else classify(lam, alpha_prev)
                rec.add(k, x, g, f, trial, theta, case, lam)
                reason = StopReason.GRAD_TOL if stop else StopReason.MAX_ITER
                break
            t, x_new, f_new = _line_search(oracle, x, g, f, trial, max(history), cfg.armijo_c, cfg.backtrack, rec)
            if t is None:
                raise LineSearchStall(f"stepsize fell below {LINE_SEARCH_FLOOR:g} at k={k}",
                                      rec.trace(kind, StopReason.NUMERICAL_FAILURE, problem_id))
            theta = 0.0 if k == 0 else t / alpha_prev
            case = CaseTag.INIT if k == 0 else classify(lam, alpha_prev)
            rec.add(k, x, g, f, t, theta, case, lam)
            g_new = oracle.gradient(x_new)
            rec.grad_evals += 1
            if not _finite(x_new, g_new):
                reason = StopReason.NUMERICAL_FAILURE
                break
            x_prev, g_prev = x, g
            x, g, f = x_new, g_new, f_new
            alpha_prev = t
            history.append(f)
    return rec.trace(kind, reason, problem_id, alpha_0=cfg.alpha_0)


def run_armijo(oracle, x0, cfg: RunConfig, problem_id: str = "") -> RunTrace:
    """Gradient descent with backtracking Armijo line search.

    The first trial stepsize is ``cfg.alpha_0``; afterwards each search starts
    from twice the previously accepted stepsize and halves on rejection.
    Cumulative oracle-call counts are stored in every state.
    """
    return _run_line_search(oracle, x0, cfg, problem_id, nonmonotone=False)


def run_bb_gll(oracle, x0, cfg: RunConfig, problem_id: str = "") -> RunTrace:
    """Long Barzilai-Borwein steps safeguarded by a nonmonotone Armijo test.

    A trial is accepted when ``f(x - t g) <= max(last W values) - c t ||g||^2``
    with ``W = cfg.gll_window``. The first trial is ``cfg.alpha_0``; a missing
    curvature estimate reuses the previous stepsize.
    """
    return _run_line_search(oracle, x0, cfg, problem_id, nonmonotone=True)


def run(oracle, x0, cfg: RunConfig, problem_id: str = "") -> RunTrace:
    """Dispatch to the driver matching the oracle type and controller."""
    method = cfg.controller.method
    if method is Method.ARMIJO:
        return run_armijo(oracle, x0, cfg, problem_id)
    if method is Method.BB_GLL:
        return run_bb_gll(oracle, x0, cfg, problem_id)
    if hasattr(oracle, "prox"):
        return run_composite(oracle, x0, cfg, problem_id)
    return run_smooth(oracle, x0, cfg, problem_id)


def tune_fixed_stepsize(oracle, x0, grid_lo: float = 0.1, grid_hi: float = 10.0, grid_n: int = 10,
                        probe_iters: int = 500) -> float:
    """Largest stepsize of a log-spaced grid for which fixed-step GD stays viable.

    A candidate is viable when ``probe_iters`` steps end at a finite value no
    larger than ``f(x0)``; growth beyond the start value is read as divergence.

    Raises
    ------
    NoViableStepsize
        If no candidate is viable.
    """
    if not (0 < grid_lo < grid_hi) or grid_n < 2:
        if not (grid_n == 1 and 0 < grid_lo == grid_hi):
            raise ValueError("need 0 < grid_lo < grid_hi and grid_n >= 2")
    grid = np.geomspace(grid_lo, grid_hi, grid_n)
    x0 = as_vector(x0)
    f0 = _start_objective(oracle, x0)
    for alpha in grid[::-1]:
        cfg = RunConfig(ControllerKind(Method.FIXED, alpha=float(alpha)), max_iter=probe_iters,
                        record_diagnostics=False)
        tr = run(oracle, x0, cfg)
        if tr.stop_reason is StopReason.NUMERICAL_FAILURE:
            continue
        if tr.final.objective <= f0:
            return float(alpha)
    raise NoViableStepsize(f"all {grid_n} candidates in [{grid_lo:g}, {grid_hi:g}] diverged")


def _start_objective(oracle, x0) -> float:
    if hasattr(oracle, "prox"):
        return oracle.smooth.value(x0) + oracle.nonsmooth_value(x0)
    return oracle.value(x0)


def reference_run(oracle, x0, max_iter: int = 20_000, grad_tol: float = 1e-13,
                  controller: Optional[ControllerKind] = None) -> RunTrace:
    """High-accuracy run used to approximate a minimizer."""
    if controller is None:
        controller = ControllerKind(Method.ADAPGM) if hasattr(oracle, "prox") else ControllerKind(Method.ADABB)
    return run(oracle, x0, RunConfig(controller, max_iter=max_iter, grad_tol=grad_tol, record_diagnostics=True))
