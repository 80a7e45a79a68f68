"""Post-hoc analysis of AdaBB-family traces.

Coefficient ledgers (``M, P`` for smooth runs, ``B, E`` for proximal runs),
Lyapunov energies, containment radii, the I1/I2/I3 partition with break
indices, stepsize lower bounds and weighted ergodic averages. Everything here
is a pure function of an immutable :class:`RunTrace`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import CaseTag, RunTrace
from .exceptions import BoundViolation, InvalidState, LedgerMismatch, NoConvergenceWarning, RequiresReference
from .stepsize import Method, classify

SQRT2 = math.sqrt(2.0)
EQ_RTOL = 1e-14
INEQ_RTOL = 1e-10
BOUND_RTOL = 1e-9
ENERGY_RTOL = 1e-10


class Category(str, enum.Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"


_CASE_TO_CATEGORY = {CaseTag.CASE_I: Category.I1, CaseTag.CASE_II: Category.I2, CaseTag.CASE_III: Category.I3}


class Status(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one named check over a trace.

    ``worst_margin`` is the smallest normalized slack ``(rhs - lhs)/scale`` seen
    (negative means violated beyond tolerance); ``first_failure`` is the first
    offending iteration index.
    """

    name: str
    status: Status
    worst_margin: float = math.nan
    first_failure: Optional[int] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status is not Status.FAIL

    def line(self) -> str:
        parts = [f"{self.status.value:<7} {self.name}"]
        if not math.isnan(self.worst_margin):
            parts.append(f"worst_margin={self.worst_margin:.3e}")
        if self.first_failure is not None:
            parts.append(f"first_failure=k{self.first_failure}")
        if self.detail:
            parts.append(self.detail)
        return "  ".join(parts)


class _Scan:
    """Collects ``lhs <= rhs`` comparisons with a relative tolerance."""

    def __init__(self, name: str, rtol: float):
        self.name, self.rtol = name, rtol
        self.worst = math.inf
        self.first: Optional[int] = None
        self.count = 0

    def le(self, k: int, lhs: float, rhs: float, scale: Optional[float] = None) -> None:
        if scale is None:
            scale = max(abs(lhs), abs(rhs))
        scale = scale if scale > 0 else 1.0
        margin = (rhs - lhs) / scale
        self.count += 1
        self.worst = min(self.worst, margin)
        if margin < -self.rtol and self.first is None:
            self.first = k

    def eq(self, k: int, a: float, b: float, scale: float) -> None:
        scale = scale if scale > 0 else 1.0
        margin = -abs(a - b) / scale
        self.count += 1
        self.worst = min(self.worst, margin)
        if margin < -self.rtol and self.first is None:
            self.first = k

    def result(self, detail: str = "") -> CheckResult:
        if self.count == 0:
            return CheckResult(self.name, Status.SKIPPED, detail=detail or "no applicable indices")
        status = Status.PASS if self.first is None else Status.FAIL
        return CheckResult(self.name, status, self.worst, self.first, detail)


def format_checks(checks: Sequence[CheckResult]) -> str:
    return "\n".join(c.line() for c in checks)


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class LedgerRow:
    """Energy coefficients of iteration ``k``.

    Smooth rows fill ``M``/``P`` and leave ``B``/``E`` as NaN; proximal rows do
    the opposite. ``w`` is NaN on the last row (it needs the next coefficient)
    and ``M``/``B`` are NaN on row 0.
    """

    k: int
    M: float = math.nan
    P: float = math.nan
    w: float = math.nan
    B: float = math.nan
    E: float = math.nan
    category: Optional[Category] = None


def ledger_branch(controller) -> str:
    """``"smooth"``, ``"strongly_convex"`` or ``"composite"`` for AdaBB-family controllers."""
    method = getattr(controller, "method", None)
    if method is Method.ADABB:
        return "smooth"
    if method is Method.ADABB_SC:
        return "strongly_convex"
    if method is Method.ADAPBB:
        return "composite"
    raise InvalidState(f"no energy ledger for controller {controller}")


def category_of(lam: float, alpha_prev: float) -> Category:
    return _CASE_TO_CATEGORY[classify(lam, alpha_prev)]


def _smooth_row(case: CaseTag, a: float, ap: float, lam: float) -> tuple[float, float]:
    if case is CaseTag.CASE_I:
        return 0.0, a * a / ap
    if case is CaseTag.CASE_II:
        return a * a / (lam * ap) - a * a / (ap * ap), 2.0 * a * a / ap - a * a / lam
    return a * a / (lam * lam) - a * a / (ap * lam), a * a / ap


def _sc_row(case: CaseTag, a: float, ap: float, lam: float) -> tuple[float, float]:
    if case is CaseTag.CASE_I:
        return 0.0, a * a / ap
    if case is CaseTag.CASE_II:
        return a / ap - a * a / (ap * ap), 2.0 * a * a / ap - a
    return 0.5 - lam / (2.0 * ap), a * a / ap


def _composite_row(case: CaseTag, ap: float, lam: float) -> tuple[float, float]:
    if case is CaseTag.CASE_I:
        return 0.0, 1.0 / ap
    if case is CaseTag.CASE_II:
        return 1.0, 0.0
    return (ap - lam) ** 2 / (lam * lam), 0.0


def _require_ledger_trace(trace: RunTrace) -> str:
    if len(trace) < 2:
        raise InvalidState("ledger needs at least one adaptive iteration")
    return ledger_branch(trace.controller)


def compute_ledger(trace: RunTrace, check: bool = True) -> list[LedgerRow]:
    """Energy coefficients of every state of an AdaBB-family trace.

    The table is selected from ``trace.controller``. With ``check=True`` the
    identities and inequalities of :func:`ledger_checks` are enforced.

    Raises
    ------
    LedgerMismatch
        If a check fails beyond tolerance.
    """
    branch = _require_ledger_trace(trace)
    st = trace.states
    K = len(st) - 1
    alphas = trace.alphas
    first, second, cats = [math.nan], [math.nan], [None]
    for k in range(1, K + 1):
        a, ap, lam = alphas[k], alphas[k - 1], st[k].lambda_k
        case = st[k].case_tag
        if branch == "smooth":
            u, v = _smooth_row(case, a, ap, lam)
        elif branch == "strongly_convex":
            u, v = _sc_row(case, a, ap, lam)
        else:
            u, v = _composite_row(case, ap, lam)
        first.append(u)
        second.append(v)
        cats.append(category_of(lam, ap))
    a0 = alphas[0]
    rows = []
    if branch == "composite":
        E = second
        E[0] = (E[1] * alphas[1] ** 2 - a0) / a0**2
        for k in range(K + 1):
            w = alphas[k] + E[k] * alphas[k] ** 2 - E[k + 1] * alphas[k + 1] ** 2 if k < K else math.nan
            rows.append(LedgerRow(k, w=w, B=first[k], E=E[k], category=cats[k]))
    else:
        P = second
        if branch == "smooth":
            P[0] = P[1] - a0
        else:
            eta = trace.controller.eta
            P[0] = (P[1] - a0) / eta if 0.0 < eta < 1.0 else 0.0
        for k in range(K + 1):
            w = alphas[k] + P[k] - P[k + 1] if k < K else math.nan
            rows.append(LedgerRow(k, M=first[k], P=P[k], w=w, category=cats[k]))
    if check:
        failed = [c for c in ledger_checks(trace, rows) if c.status is Status.FAIL]
        if failed:
            raise LedgerMismatch("; ".join(c.line() for c in failed))
    return rows


def ledger_checks(trace: RunTrace, rows: Optional[list[LedgerRow]] = None) -> list[CheckResult]:
    """Identities (relative ``1e-14``) and inequalities (relative ``1e-10``) of the ledger.

    Equalities are measured against the magnitude of the terms that form
    them, which keeps near-cancelling cases meaningful.
    """
    branch = _require_ledger_trace(trace)
    if rows is None:
        rows = compute_ledger(trace, check=False)
    st = trace.states
    alphas, thetas = trace.alphas, trace.thetas
    K = len(rows) - 1
    reset = bool(trace.metadata.get("theta1_reset", False))
    eq_start = 2 if reset else 1
    if branch == "composite":
        ident = _Scan("alpha_k*E_k == theta_k", EQ_RTOL)
        for k in range(eq_start, K + 1):
            a, E = alphas[k], rows[k].E
            ident.eq(k, a * E, thetas[k], max(abs(a * E), abs(thetas[k])))
        b_ineq = _Scan("2*B_{k+1}*alpha_{k+1}^2 <= alpha_k^2", INEQ_RTOL)
        e_ineq = _Scan("E_{k+1}*alpha_{k+1}^2 <= E_k*alpha_k^2 + alpha_k", INEQ_RTOL)
        nonneg = _Scan("B_k, E_k >= 0", INEQ_RTOL)
        for k in range(0, K):
            b_ineq.le(k + 1, 2.0 * rows[k + 1].B * alphas[k + 1] ** 2, alphas[k] ** 2)
            e_ineq.le(k + 1, rows[k + 1].E * alphas[k + 1] ** 2, rows[k].E * alphas[k] ** 2 + alphas[k],
                      scale=max(rows[k + 1].E * alphas[k + 1] ** 2, abs(rows[k].E) * alphas[k] ** 2 + alphas[k]))
        for k in range(1, K + 1):
            nonneg.le(k, -min(rows[k].B, rows[k].E), 0.0, scale=1.0)
        return [ident.result(), b_ineq.result(), e_ineq.result(), nonneg.result()]
    ident = _Scan("P_k == alpha_k*theta_k", EQ_RTOL)
    for k in range(eq_start, K + 1):
        a, ap, lam, th = alphas[k], alphas[k - 1], st[k].lambda_k, thetas[k]
        case = st[k].case_tag
        # scale: sum of the magnitudes entering the table entry
        if case is CaseTag.CASE_II:
            scale = 2.0 * a * a / ap + (a * a / lam if branch == "smooth" else a)
        else:
            scale = a * a / ap
        ident.eq(k, rows[k].P, a * th, max(scale, abs(a * th)))
    m_ineq = _Scan("2*M_k <= 1", INEQ_RTOL)
    nonneg = _Scan("M_k, P_k >= 0", INEQ_RTOL)
    for k in range(1, K + 1):
        m_ineq.le(k, 2.0 * rows[k].M, 1.0, scale=1.0)
        # M in Case ii/iii is a difference of comparable terms
        nonneg.le(k, -rows[k].M, 0.0, scale=max(1.0, abs(rows[k].M)))
        nonneg.le(k, -rows[k].P, 0.0, scale=max(abs(rows[k].P), alphas[k]))
    if branch == "smooth":
        p_ineq = _Scan("P_{k+1} <= P_k + alpha_k", INEQ_RTOL)
        for k in range(0, K):
            p_ineq.le(k + 1, rows[k + 1].P, rows[k].P + alphas[k],
                      scale=max(abs(rows[k + 1].P), abs(rows[k].P) + alphas[k]))
    else:
        eta = trace.controller.eta
        p_ineq = _Scan("P_{k+1} <= alpha_k + eta*P_k", INEQ_RTOL)
        for k in range(0, K):
            p_ineq.le(k + 1, rows[k + 1].P, alphas[k] + eta * rows[k].P,
                      scale=max(abs(rows[k + 1].P), alphas[k] + eta * abs(rows[k].P)))
    return [ident.result(), m_ineq.result(), p_ineq.result(), nonneg.result()]


# ---------------------------------------------------------------------------
# reference solutions


class ReferenceSource(str, enum.Enum):
    ANALYTIC = "Analytic"
    HIGH_ACCURACY_RUN = "HighAccuracyRun"


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    source: ReferenceSource

    def with_best(self, values) -> "ReferenceSolution":
        """Lower ``f_star`` to the smallest finite value among ``values``."""
        vals = [v for v in np.ravel(values) if math.isfinite(v)]
        best = min([self.f_star, *vals])
        return ReferenceSolution(self.x_star, best, self.source)


def reference_solution(problem, x0=None, max_iter: int = 50_000, tol: float = 1e-13) -> ReferenceSolution:
    """Minimizer and optimal value, analytic for quadratics and from a long adaptive run otherwise.

    Smooth problems use AdaBB with gradient tolerance ``tol``; composite ones
    use AdaPGM with the same tolerance on the proximal residual. A warning is
    issued when the run ends with stationarity above ``1e-12``.
    """
    from .problems import QuadraticProblem
    from .solvers import reference_run

    if isinstance(problem, QuadraticProblem):
        x = problem.solution()
        return ReferenceSolution(x, problem.value(x), ReferenceSource.ANALYTIC)
    n = getattr(problem, "n", None)
    if x0 is None:
        if n is None:
            raise ValueError("x0 is required when the problem has no dimension attribute")
        x0 = np.zeros(n)
    tr = reference_run(problem, x0, max_iter=max_iter, grad_tol=tol)
    best = min(range(len(tr)), key=lambda i: tr[i].grad_norm)
    x = np.array(tr[best].x)
    if hasattr(problem, "prox"):
        x_next = problem.prox(1.0, x - problem.smooth.gradient(x))
        resid = float(np.linalg.norm(x - x_next))
        fstar = problem.smooth.value(x) + problem.nonsmooth_value(x)
    else:
        resid = float(np.linalg.norm(problem.gradient(x)))
        fstar = problem.value(x)
    if resid > 1e-12:
        warnings.warn(f"reference stationarity {resid:.2e} exceeds 1e-12", NoConvergenceWarning, stacklevel=2)
    return ReferenceSolution(x, float(fstar), ReferenceSource.HIGH_ACCURACY_RUN)


# ---------------------------------------------------------------------------
# energies


def _need_ref(ref):
    if ref is None:
        raise RequiresReference("a reference solution is required")


def _iterates(trace: RunTrace) -> np.ndarray:
    return trace.iterates()


def _composite_parts(trace: RunTrace):
    """Objective values and ``||grad f + xi||`` per state (xi = 0 for smooth traces)."""
    obj = trace.objectives
    if trace.composite:
        gnorm = np.array([np.linalg.norm(s.grad + s.xi) for s in trace.states])
    else:
        gnorm = trace.grad_norms
    return obj, gnorm


@dataclass(frozen=True)
class EnergySequence:
    """Lyapunov energies for ``k = 1..K`` (array position ``k - 1``).

    ``upper`` is the energy (smooth ``Upsilon_k``, proximal ``V_k``) and
    ``lower`` its reduced form (``Phi_k`` or ``U_k``); the theory gives
    ``upper[k+1] <= lower[k] <= upper[k]``.
    """

    kind: str
    upper: np.ndarray
    lower: np.ndarray

    @property
    def initial(self) -> float:
        return float(self.upper[0]) if self.upper.size else 0.0

    def check(self, rtol: float = ENERGY_RTOL) -> CheckResult:
        name = "energy descent upper_{k+1} <= lower_k <= upper_k"
        scale = self.initial if self.initial > 0 else 1.0
        scan = _Scan(name, rtol)
        for i in range(self.upper.size):
            scan.le(i + 1, self.lower[i], self.upper[i], scale=scale)
            if i + 1 < self.upper.size:
                scan.le(i + 2, self.upper[i + 1], self.lower[i], scale=scale)
        return scan.result(f"initial={self.initial:.6e}")


def lyapunov_sequence(trace: RunTrace, ref: Optional[ReferenceSolution],
                      rows: Optional[list[LedgerRow]] = None) -> EnergySequence:
    """Energies along an AdaBB-family trace.

    Smooth and strongly convex traces give ``Upsilon_k`` and ``Phi_k``;
    proximal traces give ``V_k`` and ``U_k``. For the strongly convex table the
    energies use ``P_0 = P_1 - alpha_0`` (so ``w_0 = 0``); the ledger's own
    ``P_0`` only enters the inequality check.
    """
    _need_ref(ref)
    if len(trace) < 2:
        return EnergySequence("empty", np.zeros(0), np.zeros(0))
    branch = ledger_branch(trace.controller)
    if rows is None:
        rows = compute_ledger(trace, check=False)
    X = _iterates(trace)
    alphas = trace.alphas
    K = len(trace) - 1
    dist2 = np.sum((X - ref.x_star) ** 2, axis=1)
    if branch == "composite":
        obj, gnorm = _composite_parts(trace)
        gap = obj - ref.f_star
        B = np.array([r.B for r in rows])
        E = np.array([r.E for r in rows])
        EA2 = E * alphas**2
        w = alphas[:-1] + EA2[:-1] - EA2[1:]
        k = np.arange(1, K + 1)
        V = dist2[k] + 2.0 * B[k] * alphas[k] ** 2 * gnorm[k - 1] ** 2 + 2.0 * alphas[k - 1] * (1.0 + E[k - 1] * alphas[k - 1]) * gap[k - 1]
        U = V - 2.0 * w[k - 1] * gap[k - 1]
        return EnergySequence("composite", V, U)
    fvals = trace.objectives
    gap = fvals - ref.f_star
    M = np.array([r.M for r in rows])
    P = np.array([r.P for r in rows])
    P[0] = P[1] - alphas[0]
    w = alphas[:-1] + P[:-1] - P[1:]
    step2 = np.sum(np.diff(X, axis=0) ** 2, axis=1)
    k = np.arange(1, K + 1)
    ups = dist2[k] + 2.0 * M[k] * step2[k - 1] + (2.0 * alphas[k - 1] + 2.0 * P[k - 1]) * gap[k - 1]
    phi = ups - 2.0 * w[k - 1] * gap[k - 1]
    return EnergySequence(branch, ups, phi)


def containment_radius(trace: RunTrace, ref: Optional[ReferenceSolution],
                       rows: Optional[list[LedgerRow]] = None) -> float:
    """Radius of the ball around ``ref.x_star`` that contains every iterate.

    Smooth: ``R^2 = ||x0-x*||^2 + alpha_0^2 (1 + 2 M_1) ||grad f(x0)||^2
    + max(2 P_1 - 2 alpha_0, 0) (f(x0) - f*)``. Proximal: ``T^2`` with
    ``2 alpha_0^2 ||grad f(x0) + xi0||^2`` and ``max(2 (E_1 alpha_1^2 - alpha_0), 0)``.
    """
    _need_ref(ref)
    s0 = trace.states[0]
    if s0.x is None:
        raise ValueError("trace was recorded without iterates")
    d2 = float(np.sum((s0.x - ref.x_star) ** 2))
    gap0 = s0.objective - ref.f_star
    if len(trace) < 2:
        if s0.grad_norm == 0.0 and gap0 <= 0.0:
            return math.sqrt(d2)
        raise InvalidState("containment radius needs the first ledger row")
    branch = ledger_branch(trace.controller)
    if rows is None:
        rows = compute_ledger(trace, check=False)
    a0, a1 = trace.alphas[0], trace.alphas[1]
    _, gnorm = _composite_parts(trace)
    if branch == "composite":
        r2 = d2 + 2.0 * a0**2 * gnorm[0] ** 2 + max(2.0 * (rows[1].E * a1**2 - a0), 0.0) * gap0
    else:
        r2 = d2 + a0**2 * (1.0 + 2.0 * rows[1].M) * gnorm[0] ** 2 + max(2.0 * rows[1].P - 2.0 * a0, 0.0) * gap0
    return math.sqrt(max(r2, 0.0))


def containment_check(trace: RunTrace, ref: ReferenceSolution, rtol: float = ENERGY_RTOL) -> CheckResult:
    R = containment_radius(trace, ref)
    dist = np.linalg.norm(_iterates(trace) - ref.x_star, axis=1)
    scan = _Scan("iterates within containment radius", rtol)
    for k, d in enumerate(dist):
        scan.le(k, float(d), R, scale=R if R > 0 else 1.0)
    return scan.result(f"radius={R:.6e} max_dist={dist.max():.6e}")


# ---------------------------------------------------------------------------
# partition and stepsize bounds


@dataclass(frozen=True)
class Partition:
    """Categories of indices ``1..K`` (``labels[i-1]`` is the label of ``i``)."""

    labels: tuple[Category, ...]
    break_indices: tuple[int, ...]
    i0: Optional[int]

    def label(self, i: int) -> Category:
        return self.labels[i - 1]

    def segments(self, k: Optional[int] = None) -> list[tuple[int, ...]]:
        """Index runs ``T_1, ..., T_m`` of ``(i0+1, ..., k)`` split after each break index."""
        if self.i0 is None:
            raise InvalidState("i0 is undefined for this trace")
        k = len(self.labels) if k is None else k
        cuts = [b for b in self.break_indices if b <= k]
        out, start = [], self.i0 + 1
        for b in cuts:
            out.append(tuple(range(start, b + 1)))
            start = b + 1
        out.append(tuple(range(start, k + 1)))
        return out


def labels_from_pairs(pairs) -> list[Category]:
    """Categories of a sequence of ``(lambda_k, alpha_{k-1})`` pairs."""
    return [category_of(lam, ap) for lam, ap in pairs]


def break_indices(labels: Sequence[Category]) -> list[int]:
    """Indices ``i`` (1-based) in I1 whose successor exists and is not in I3."""
    return [i for i in range(1, len(labels)) if labels[i - 1] is Category.I1 and labels[i] is not Category.I3]


def initial_offset(labels: Sequence[Category]) -> Optional[int]:
    """Offset ``i0`` from the categories of indices 1, 2, 3; ``None`` if the prefix is too short."""
    I1, I2, I3 = Category.I1, Category.I2, Category.I3
    n = len(labels)
    if n == 0:
        return None
    c1 = labels[0]
    if c1 is I2:
        return 0
    if n < 2:
        return None
    c2 = labels[1]
    if c1 is I1:
        return 0 if c2 is I3 else 1
    # c1 is I3
    if c2 is I3:
        return 0
    if c2 is I2:
        return 1
    if n < 3:
        return None
    return 1 if labels[2] is I3 else 2


def categorize(trace: RunTrace) -> Partition:
    lams = trace.lambdas
    alphas = trace.alphas
    labels = tuple(category_of(lams[k], alphas[k - 1]) for k in range(1, len(trace)))
    return Partition(labels, tuple(break_indices(labels)), initial_offset(labels))


@dataclass(frozen=True)
class BoundReport:
    checks: tuple[CheckResult, ...]
    L: Optional[float]
    partition: Optional[Partition] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        return format_checks(self.checks)


BOUND_CHECK_NAMES = (
    "alpha_i >= 1/(sqrt2 L)",
    "sum_{i<=k} alpha_i >= (k-2+sqrt2)/L",
    "sum_{i0<i<=k} alpha_i >= (k-i0)/L",
    "i in I2 => alpha_i >= 1/L",
    "i+1 in I3 => alpha_i >= 2/L",
    "i in I1|I2, i+1 in I1 => alpha_{i+1} >= 1/L",
    "i in I3 => alpha_{i-1}+alpha_i+alpha_{i+1} >= (2+sqrt2)/L",
)


def verify_stepsize_bounds(trace: RunTrace, L: Optional[float], strict: bool = False,
                           rtol: float = BOUND_RTOL) -> BoundReport:
    """Check the stepsize lower bounds of general AdaBB against a global constant ``L``.

    Every check compares ``lhs >= rhs`` with slack ``rtol * rhs``. Checks are
    reported as SKIPPED when ``L`` is unknown or the controller is not general
    AdaBB.

    Raises
    ------
    BoundViolation
        With ``strict=True``, at the first failing check.
    """
    method = getattr(trace.controller, "method", None)
    reason = None
    if L is None or not (L > 0 and math.isfinite(L)):
        reason = "no certified global smoothness constant"
    elif method is not Method.ADABB:
        reason = f"bounds are stated for general AdaBB, not {trace.controller}"
    elif len(trace) < 2:
        reason = "no adaptive iterations"
    if reason is not None:
        return BoundReport(tuple(CheckResult(n, Status.SKIPPED, detail=reason) for n in BOUND_CHECK_NAMES), L)
    part = categorize(trace)
    alphas = trace.alphas
    K = len(trace) - 1
    lab = part.label
    scans = [_Scan(n, rtol) for n in BOUND_CHECK_NAMES]
    floor, total, from_i0, est_a, est_b, est_c, est_d = scans
    csum = np.cumsum(alphas[1:])
    for i in range(1, K + 1):
        floor.le(i, 1.0 / (SQRT2 * L), alphas[i], scale=1.0 / L)
        total.le(i, (i - 2 + SQRT2) / L, csum[i - 1], scale=max(1.0, i) / L)
    if part.i0 is not None:
        base = csum[part.i0 - 1] if part.i0 > 0 else 0.0
        for k in range(3, K + 1):
            if k > part.i0:
                from_i0.le(k, (k - part.i0) / L, csum[k - 1] - base, scale=(k - part.i0) / L)
    for i in range(0, K):
        if lab(i + 1) is Category.I3:
            est_b.le(i, 2.0 / L, alphas[i], scale=2.0 / L)
    for i in range(1, K + 1):
        if lab(i) is Category.I2:
            est_a.le(i, 1.0 / L, alphas[i], scale=1.0 / L)
        if i < K and lab(i) is not Category.I3 and lab(i + 1) is Category.I1:
            est_c.le(i + 1, 1.0 / L, alphas[i + 1], scale=1.0 / L)
        if i < K and lab(i) is Category.I3:
            est_d.le(i, (2.0 + SQRT2) / L, alphas[i - 1] + alphas[i] + alphas[i + 1], scale=(2.0 + SQRT2) / L)
    margin_1 = (alphas[1] - 1.0 / (SQRT2 * L)) * L
    checks = (floor.result(f"alpha_1 margin={margin_1:.3e}"),) + tuple(s.result() for s in scans[1:])
    if strict:
        for c in checks:
            if c.status is Status.FAIL:
                raise BoundViolation(f"{c.name} fails at index {c.first_failure}", c.first_failure)
    return BoundReport(checks, L, part)


# ---------------------------------------------------------------------------
# ergodic averages


@dataclass(frozen=True)
class ErgodicAverages:
    """Weighted averages ``x_bar[k-1]`` and weight totals ``S[k-1]`` for ``k = 1..K``."""

    x_bar: np.ndarray
    S: np.ndarray


def ergodic_average(trace: RunTrace, rows: Optional[list[LedgerRow]] = None) -> ErgodicAverages:
    """Averages weighting ``x^k`` by ``alpha_k + P_k`` (proximal: ``alpha_k (1 + E_k alpha_k)``)
    and each earlier ``x^i`` (``1 <= i < k``) by ``w_i``."""
    branch = ledger_branch(trace.controller)
    if rows is None:
        rows = compute_ledger(trace, check=False)
    X = _iterates(trace)
    alphas = trace.alphas
    K = len(trace) - 1
    if branch == "composite":
        C = np.array([r.E for r in rows]) * alphas**2
    else:
        C = np.array([r.P for r in rows])
    # head weight alpha_k + C_k; tail weights w_i = alpha_i + C_i - C_{i+1}
    head = alphas + C
    w = alphas[:-1] + C[:-1] - C[1:]
    xbar = np.empty((K, X.shape[1]))
    S = np.empty(K)
    acc = np.zeros(X.shape[1])
    wsum = 0.0
    for k in range(1, K + 1):
        if k >= 2:
            acc = acc + w[k - 1] * X[k - 1]
            wsum += w[k - 1]
        S[k - 1] = head[k] + wsum
        xbar[k - 1] = (head[k] * X[k] + acc) / S[k - 1]
    return ErgodicAverages(xbar, S)


@dataclass(frozen=True)
class ErgodicCheck:
    result: CheckResult
    gaps: np.ndarray
    bounds: np.ndarray
    energy_1: float
    scaled_gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rate_constant(self) -> float:
        """``max_k k * gap_k``; finite and below the theoretical constant for an O(1/k) rate."""
        return float(self.scaled_gaps.max()) if self.scaled_gaps.size else 0.0


def ergodic_bound_check(trace: RunTrace, objective, ref: Optional[ReferenceSolution],
                        rtol: float = ENERGY_RTOL) -> ErgodicCheck:
    """Compare ``objective(x_bar^k) - f*`` with ``energy_1 / (2 S_k)`` for every ``k``.

    ``objective`` evaluates the full objective (smooth ``f`` or ``f + g``).
    """
    _need_ref(ref)
    rows = compute_ledger(trace, check=False)
    avg = ergodic_average(trace, rows)
    energy = lyapunov_sequence(trace, ref, rows)
    top = float(energy.lower[0])
    gaps = np.array([objective(x) for x in avg.x_bar]) - ref.f_star
    bounds = top / (2.0 * avg.S)
    scan = _Scan("ergodic gap <= energy_1/(2 S_k)", rtol)
    for k in range(1, gaps.size + 1):
        scan.le(k, gaps[k - 1], bounds[k - 1], scale=max(bounds[k - 1], 1e-300))
    ks = np.arange(1, gaps.size + 1)
    return ErgodicCheck(scan.result(f"energy_1={top:.6e}"), gaps, bounds, top, ks * gaps)


def rate_witness(trace: RunTrace, check: ErgodicCheck, L: Optional[float]) -> CheckResult:
    """``k * gap_k`` stays below ``energy_1 / (2 c)`` with ``c`` a per-step stepsize floor.

    ``c = 1/(sqrt2 L)`` for general AdaBB (every stepsize after the first is at
    least that) and ``min(alpha_0, 1/(sqrt2 L))`` otherwise.
    """
    if L is None:
        return CheckResult("k*(f(x_bar^k)-f*) bounded", Status.SKIPPED, detail="no global smoothness constant")
    floor = 1.0 / (SQRT2 * L)
    method = getattr(trace.controller, "method", None)
    c = floor if method is Method.ADABB else min(trace.alphas[0], floor)
    # S_k >= alpha_1 + ... + alpha_k >= k c
    limit = check.energy_1 / (2.0 * c)
    scan = _Scan("k*(f(x_bar^k)-f*) bounded", ENERGY_RTOL)
    for k, v in enumerate(check.scaled_gaps, start=1):
        scan.le(k, float(v), limit, scale=max(limit, 1e-300))
    return scan.result(f"max={check.rate_constant:.3e} limit={limit:.3e}")


def iterations_to_gap(objectives, f_star: float, tol: float) -> Optional[int]:
    """First index with ``objective - f_star <= tol``, or ``None``."""
    hits = np.nonzero(np.asarray(objectives) - f_star <= tol)[0]
    return int(hits[0]) if hits.size else None
