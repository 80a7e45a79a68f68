"""Stepsize controllers.

Every controller maps the curvature estimates of the latest secant pair and
the previous ``(alpha, theta)`` to the next ``(alpha, theta, case)``. They are
pure functions; the iteration drivers in :mod:`adabb.solvers` call them.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, replace
from typing import Optional

from .core import CaseTag
from .exceptions import InvalidState

SQRT2 = math.sqrt(2.0)


class Method(str, enum.Enum):
    ADABB = "AdaBB"
    ADABB_SC = "AdaBB-SC"
    ADAPBB = "AdaPBB"
    ADGD = "AdGD"
    ADGD2 = "AdGD2"
    ADAPGM = "AdaPGM"
    ADAPGM_PIR = "AdaPGM-pi-r"
    FIXED = "GD"
    ARMIJO = "Armijo"
    BB_GLL = "BB-GLL"


OPTION_I = 1
OPTION_II = 2

# (Case ii option, Case iii option) of the four general-AdaBB variants
ADABB_VARIANTS = {
    "AdaBB": (OPTION_II, OPTION_II),
    "AdaBB1": (OPTION_I, OPTION_I),
    "AdaBB2": (OPTION_I, OPTION_II),
    "AdaBB3": (OPTION_II, OPTION_I),
}

ADABB_FAMILY = frozenset({Method.ADABB, Method.ADABB_SC, Method.ADAPBB})
LINE_SEARCH = frozenset({Method.ARMIJO, Method.BB_GLL})


@dataclass(frozen=True)
class ControllerKind:
    """Which stepsize rule drives a run, together with its parameters.

    Only the fields relevant to ``method`` are read: ``option_ii`` and
    ``option_iii`` for AdaBB, ``eta``/``delta`` for AdaBB-SC, ``pi``/``r`` for
    AdaPGM-pi-r and ``alpha`` for fixed-step GD. ``alpha=None`` for GD means
    "use 1/L", resolved by the driver.
    """

    method: Method
    option_ii: int = OPTION_II
    option_iii: int = OPTION_II
    eta: float = 0.5
    delta: float = 1.5
    pi: float = 1.0
    r: float = 0.5
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.option_ii not in (OPTION_I, OPTION_II) or self.option_iii not in (OPTION_I, OPTION_II):
            raise InvalidState("AdaBB options must be 1 (Option I) or 2 (Option II)")
        if self.method is Method.ADABB_SC:
            if not 0.0 <= self.eta < 1.0:
                raise InvalidState(f"eta must lie in [0, 1), got {self.eta}")
            if not 1.0 < self.delta < 2.0:
                raise InvalidState(f"delta must lie in (1, 2), got {self.delta}")
        if self.method is Method.ADAPGM_PIR and not self.pi > self.r >= 0.5:
            raise InvalidState(f"need pi > r >= 1/2, got pi={self.pi}, r={self.r}")
        if self.alpha is not None and not self.alpha > 0:
            raise InvalidState(f"fixed stepsize must be positive, got {self.alpha}")

    @classmethod
    def adabb(cls, option_ii: int = OPTION_II, option_iii: int = OPTION_II) -> "ControllerKind":
        return cls(Method.ADABB, option_ii=option_ii, option_iii=option_iii)

    @classmethod
    def parse(cls, text: str) -> "ControllerKind":
        """Build a controller from a label such as ``"AdaBB3"`` or ``"AdaBB-SC(eta=0.5, delta=1.5)"``."""
        m = re.fullmatch(r"\s*([A-Za-z0-9_\-]+)\s*(?:\((.*)\))?\s*", text)
        if m is None:
            raise ValueError(f"cannot parse controller {text!r}")
        name, args = m.group(1), m.group(2)
        kwargs = {}
        if args:
            for part in args.split(","):
                if not part.strip():
                    continue
                key, _, val = part.partition("=")
                kwargs[key.strip()] = float(val)
        aliases = {"FixedGD": "GD", "AdaBB_SC": "AdaBB-SC", "AdaPGM_PiR": "AdaPGM-pi-r", "BB_GLL": "BB-GLL"}
        name = aliases.get(name, name)
        if name in ADABB_VARIANTS:
            opt_ii, opt_iii = ADABB_VARIANTS[name]
            return cls(Method.ADABB, option_ii=opt_ii, option_iii=opt_iii)
        try:
            method = Method(name)
        except ValueError:
            raise ValueError(f"unknown controller {name!r}") from None
        return cls(method, **kwargs)

    @property
    def label(self) -> str:
        if self.method is Method.ADABB:
            for name, opts in ADABB_VARIANTS.items():
                if opts == (self.option_ii, self.option_iii):
                    return name
        if self.method is Method.FIXED and self.alpha is not None:
            return f"GD({self.alpha:.6g})"
        return self.method.value

    def __str__(self):
        return self.label

    @property
    def adabb_family(self) -> bool:
        return self.method in ADABB_FAMILY

    def with_alpha(self, alpha: float) -> "ControllerKind":
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class StepDecision:
    alpha_k: float
    theta_k: float
    case_tag: CaseTag

    def __post_init__(self):
        if not self.alpha_k > 0:
            raise InvalidState(f"controller produced non-positive stepsize {self.alpha_k}")


def _check(lam: float, alpha_prev: float, theta_prev: float) -> None:
    if not alpha_prev > 0:
        raise InvalidState(f"alpha_prev must be positive, got {alpha_prev}")
    if not lam > 0:
        raise InvalidState(f"lambda_k must be positive, got {lam}")
    if not theta_prev >= 0:
        raise InvalidState(f"theta_prev must be nonnegative, got {theta_prev}")


def classify(lam: float, alpha_prev: float, split: float = 0.5) -> CaseTag:
    """Case of ``lam`` relative to ``alpha_prev``; ``split`` is the Case ii/iii boundary fraction."""
    if lam >= alpha_prev:
        return CaseTag.CASE_I
    if lam > split * alpha_prev:
        return CaseTag.CASE_II
    return CaseTag.CASE_III


def theta0_init(lambda_1: float, alpha_0: float) -> float:
    """Initial ratio making the first Case-i step equal ``lambda_1 / sqrt(2)``."""
    if not (lambda_1 > 0 and alpha_0 > 0):
        raise InvalidState("theta0_init needs positive inputs")
    if math.isinf(lambda_1):
        return 0.0
    if lambda_1 >= SQRT2 * alpha_0:
        return max(lambda_1**2 / (2.0 * alpha_0**2) - 1.0, 0.0)
    return 0.0


def adabb_option_i_case_ii(lam: float, alpha_prev: float, theta_prev: float) -> float:
    a = math.sqrt(lam / (2.0 * (alpha_prev - lam)))
    b = math.sqrt((1.0 + theta_prev) * lam / (2.0 * lam - alpha_prev))
    return min(a, b) * alpha_prev


def adabb_option_i_case_iii(lam: float, alpha_prev: float) -> float:
    return math.sqrt(alpha_prev / (2.0 * (alpha_prev - lam))) * lam


def adabb_step(lam: float, alpha_prev: float, theta_prev: float,
               opt_ii: int = OPTION_II, opt_iii: int = OPTION_II) -> StepDecision:
    """General AdaBB rule. ``lam = inf`` (no curvature seen) falls into Case i."""
    _check(lam, alpha_prev, theta_prev)
    case = classify(lam, alpha_prev)
    if case is CaseTag.CASE_I:
        alpha = math.sqrt(1.0 + theta_prev) * alpha_prev
        return StepDecision(alpha, alpha / alpha_prev, case)
    if case is CaseTag.CASE_II:
        alpha = lam if opt_ii == OPTION_II else adabb_option_i_case_ii(lam, alpha_prev, theta_prev)
        return StepDecision(alpha, 2.0 * alpha / alpha_prev - alpha / lam, case)
    alpha = lam / SQRT2 if opt_iii == OPTION_II else adabb_option_i_case_iii(lam, alpha_prev)
    return StepDecision(alpha, alpha / alpha_prev, case)


def adabb_sc_step(lam: float, alpha_prev: float, theta_prev: float,
                  eta: float = 0.5, delta: float = 1.5) -> StepDecision:
    """AdaBB rule for locally strongly convex objectives; never exceeds ``lam``."""
    _check(lam, alpha_prev, theta_prev)
    if not 0.0 <= eta < 1.0 or not 1.0 < delta < 2.0:
        raise InvalidState(f"eta in [0,1) and delta in (1,2) required, got {eta}, {delta}")
    case = classify(lam, alpha_prev, split=delta / 2.0)
    if case is CaseTag.CASE_I:
        alpha = min(math.sqrt(1.0 + eta * theta_prev) * alpha_prev, lam)
        return StepDecision(alpha, alpha / alpha_prev, case)
    if case is CaseTag.CASE_II:
        return StepDecision(lam, 2.0 * lam / alpha_prev - 1.0, case)
    alpha = lam / SQRT2
    return StepDecision(alpha, alpha / alpha_prev, case)


def adapbb_step(lam: float, alpha_prev: float, theta_prev: float) -> StepDecision:
    """Proximal AdaBB rule."""
    _check(lam, alpha_prev, theta_prev)
    case = classify(lam, alpha_prev)
    if case is CaseTag.CASE_I:
        alpha = math.sqrt(1.0 + theta_prev) * alpha_prev
        return StepDecision(alpha, alpha / alpha_prev, case)
    if case is CaseTag.CASE_II:
        return StepDecision(alpha_prev / SQRT2, 0.0, case)
    return StepDecision(lam / SQRT2, 0.0, case)


def _inv_sqrt_pos(a: float) -> float:
    # 1/sqrt([a]_+) with a zero bracket read as +inf
    return 1.0 / math.sqrt(a) if a > 0 else math.inf


def baseline_step(kind: ControllerKind, lam: float, beta: float, lk: float,
                  alpha_prev: float, theta_prev: float) -> StepDecision:
    """AdGD, AdGD2, AdaPGM, AdaPGM-pi-r and fixed-step GD updates."""
    if not alpha_prev > 0:
        raise InvalidState(f"alpha_prev must be positive, got {alpha_prev}")
    m = kind.method
    a = alpha_prev
    if m is Method.ADGD:
        second = math.inf if lk == 0 else 1.0 / (SQRT2 * lk)
        alpha = min(a * math.sqrt(1.0 + theta_prev), second)
    elif m is Method.ADGD2:
        alpha = min(math.sqrt(2.0 / 3.0 + theta_prev) * a, a * _inv_sqrt_pos(2.0 * a * a * lk * lk - 1.0))
    elif m is Method.ADAPGM:
        bracket = (a / beta) * (a / lam - 1.0)
        alpha = min(a * math.sqrt(1.0 + theta_prev), 0.5 * a * _inv_sqrt_pos(bracket))
    elif m is Method.ADAPGM_PIR:
        pi, r = kind.pi, kind.r
        denom = (1.0 - 2.0 * r) + a * a * lk * lk + 2.0 * a * (r - 1.0) / beta
        second = math.sqrt(1.0 - r / pi) * _inv_sqrt_pos(denom)
        alpha = min(math.sqrt(1.0 / pi + theta_prev), second) * a
    elif m is Method.FIXED:
        if kind.alpha is None:
            raise InvalidState("fixed-step GD needs a resolved stepsize")
        alpha = kind.alpha
    else:
        raise InvalidState(f"{m.value} is not a baseline stepsize rule")
    if math.isinf(alpha):
        raise InvalidState("baseline rule produced an infinite stepsize")
    return StepDecision(alpha, alpha / a, classify(lam, a))


def initial_theta(kind: ControllerKind, lambda_1: float, alpha_0: float) -> float:
    """theta_0 used by each method: the lambda_1-dependent choice for the AdaBB family,
    the published defaults for the baselines."""
    m = kind.method
    if m in ADABB_FAMILY:
        return theta0_init(lambda_1, alpha_0)
    if m is Method.ADGD2:
        return 1.0 / 3.0
    if m in (Method.ADAPGM, Method.ADAPGM_PIR):
        return 1.0
    if m is Method.FIXED:
        return 1.0
    return 0.0


def next_step(kind: ControllerKind, lam: float, beta: float, lk: float,
              alpha_prev: float, theta_prev: float) -> StepDecision:
    """Dispatch to the rule selected by ``kind``."""
    m = kind.method
    if m is Method.ADABB:
        return adabb_step(lam, alpha_prev, theta_prev, kind.option_ii, kind.option_iii)
    if m is Method.ADABB_SC:
        return adabb_sc_step(lam, alpha_prev, theta_prev, kind.eta, kind.delta)
    if m is Method.ADAPBB:
        return adapbb_step(lam, alpha_prev, theta_prev)
    return baseline_step(kind, lam, beta, lk, alpha_prev, theta_prev)
