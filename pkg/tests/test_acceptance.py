"""Acceptance gate: eleven criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import math
import sys
import time

import numpy as np
import pytest

from adabb.core import CaseTag, StopReason
from adabb.diagnostics import (ReferenceSolution, ReferenceSource, Status, compute_ledger, containment_check,
                               ergodic_bound_check, iterations_to_gap, ledger_checks, lyapunov_sequence,
                               rate_witness, reference_solution, verify_stepsize_bounds)
from adabb.problems import (QuadraticProblem, build_cubic_from_logistic, certify_lipschitz, gamma_from_rule,
                            random_quadratic, synthetic_lasso, synthetic_logistic)
from adabb.solvers import RunConfig, reference_run, run
from adabb.stepsize import OPTION_I, OPTION_II, adabb_step, classify

SQRT2 = math.sqrt(2.0)
VARIANTS = ("AdaBB", "AdaBB1", "AdaBB2", "AdaBB3")
GRAD_RTOL = 1e-10  # stop once ||grad|| <= 1e-10 ||grad f(x0)||, above the round-off floor of the secant pairs
RESULTS: dict[int, str] = {}


def report(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {title} [{detail}]"
    RESULTS[n] = line
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared desk suite


@functools.lru_cache(maxsize=None)
def suite():
    """Five quadratics and five logistic problems with certified constants."""
    probs = []
    for seed, mu in enumerate([0.0, 1e-4, 1e-3, 1e-2, 1e-1]):
        q = random_quadratic(50, mu, 1.0 + seed, seed)
        probs.append((f"quadratic-{seed}", q, certify_lipschitz(q)))
    for seed in range(5):
        p = synthetic_logistic(m=300 + 50 * seed, n=40, seed=seed)
        if seed % 2:
            p.gamma = gamma_from_rule(p, "L/10m")
        probs.append((f"logistic-{seed}", p, certify_lipschitz(p)))
    return tuple(probs)


def start(prob):
    return np.random.default_rng(7).standard_normal(prob.n)


@functools.lru_cache(maxsize=None)
def suite_runs():
    """Traces of every AdaBB variant plus the strongly convex rule, with references."""
    out = []
    for name, prob, L in suite():
        x0 = start(prob)
        ref = reference_solution(prob, x0)
        tol = GRAD_RTOL * np.linalg.norm(prob.gradient(x0))
        for label in VARIANTS + ("AdaBB-SC",):
            tr = run(prob, x0, RunConfig(label, max_iter=1000, grad_tol=tol), name)
            out.append((name, label, prob, L, ref, tr))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def lasso_runs():
    out = []
    for seed in range(3):
        p = synthetic_lasso(100, 50, 10, seed=seed)
        x0 = np.zeros(p.n)
        ref = reference_solution(p, x0)
        tol = GRAD_RTOL * np.linalg.norm(p.smooth.gradient(x0))
        tr = run(p, x0, RunConfig("AdaPBB", max_iter=2000, grad_tol=tol), f"lasso-{seed}")
        out.append((f"lasso-{seed}", "AdaPBB", p, p.lipschitz_hint, ref, tr))
    return tuple(out)


def sc_quadratic(seed=0):
    return random_quadratic(20, 0.1, 10.0, seed)


@functools.lru_cache(maxsize=None)
def sc_runs():
    out = []
    for seed in range(3):
        q = sc_quadratic(seed)
        x0 = np.random.default_rng(100 + seed).standard_normal(20)
        x = q.solution()
        ref = ReferenceSolution(x, q.value(x), ReferenceSource.ANALYTIC)
        tr = run(q, x0, RunConfig("AdaBB-SC", max_iter=200), f"sc-{seed}")
        out.append((f"sc-{seed}", "AdaBB-SC", q, q.lipschitz_hint, ref, tr))
    return tuple(out)


def general_runs():
    return [r for r in suite_runs() if r[1] in VARIANTS]


def bound_checks(names):
    worst = math.inf
    failures = []
    for name, label, prob, L, ref, tr in general_runs():
        for c in verify_stepsize_bounds(tr, L).checks:
            if c.name not in names or c.status is Status.SKIPPED:
                continue
            worst = min(worst, c.worst_margin)
            if c.status is Status.FAIL:
                failures.append(f"{name}/{label}: {c.name} at k={c.first_failure}")
    return worst, failures


# ---------------------------------------------------------------------------
# criteria


def criterion_1():
    failures, worst = [], math.inf
    for name, label, prob, L, ref, tr in general_runs():
        a = tr.alphas[1:]
        slack = (a - 1.0 / (SQRT2 * L)) * L
        worst = min(worst, float(slack.min()))
        if np.any(slack < -1e-9):
            failures.append(f"{name}/{label} k={int(np.argmax(slack < -1e-9)) + 1}")
    # timing: ten problems, AdaBB, 1000 iterations each without early stopping
    t0 = time.perf_counter()
    roundoff_ok = True
    for name, prob, L in suite():
        x0 = start(prob)
        g0 = np.linalg.norm(prob.gradient(x0))
        tr = run(prob, x0, RunConfig("AdaBB", max_iter=1000), name)
        # any violation of the floor in an unstopped run sits past the round-off stop
        bad = np.nonzero(tr.alphas[1:] < (1.0 / (SQRT2 * L)) * (1 - 1e-9))[0] + 1
        if bad.size and tr.grad_norms[bad[0] - 1] > GRAD_RTOL * g0:
            roundoff_ok = False
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 5.0 and roundoff_ok
    report(1, "stepsize floor alpha_k >= 1/(sqrt2 L)", ok,
           f"{len(general_runs())} traces, worst margin {worst:.3e}/L, 10x1000 iterations in {elapsed:.2f}s"
           + (f"; failures {failures[:3]}" if failures else "")
           + ("" if roundoff_ok else "; violation above round-off floor in unstopped run"))


def criterion_2():
    names = {"sum_{i<=k} alpha_i >= (k-2+sqrt2)/L", "sum_{i0<i<=k} alpha_i >= (k-i0)/L",
             "i in I2 => alpha_i >= 1/L", "i+1 in I3 => alpha_i >= 2/L",
             "i in I1|I2, i+1 in I1 => alpha_{i+1} >= 1/L",
             "i in I3 => alpha_{i-1}+alpha_i+alpha_{i+1} >= (2+sqrt2)/L"}
    worst, failures = bound_checks(names)
    report(2, "partial-sum and per-category stepsize bounds", not failures,
           f"worst normalized margin {worst:.3e}" + (f"; failures {failures[:3]}" if failures else ""))


def ledger_traces():
    return list(suite_runs()) + list(lasso_runs()) + list(sc_runs())


def criterion_3():
    failures, n_checks = [], 0
    worst_eq = 0.0
    for name, label, prob, L, ref, tr in ledger_traces():
        rows = compute_ledger(tr, check=False)
        for c in ledger_checks(tr, rows):
            n_checks += 1
            if "==" in c.name:
                worst_eq = max(worst_eq, -c.worst_margin if math.isfinite(c.worst_margin) else 0.0)
            if c.status is Status.FAIL:
                failures.append(f"{name}/{label}: {c.name} at k={c.first_failure}")
    report(3, "ledger identities and inequalities", not failures,
           f"{len(ledger_traces())} traces, {n_checks} checks, worst identity residual {worst_eq:.2e} relative"
           + (f"; failures {failures[:3]}" if failures else ""))


def criterion_4():
    failures, worst = [], math.inf
    traces = [r for r in suite_runs()] + list(lasso_runs())
    for name, label, prob, L, ref, tr in traces:
        c = lyapunov_sequence(tr, ref).check(rtol=1e-10)
        worst = min(worst, c.worst_margin)
        if c.status is Status.FAIL:
            failures.append(f"{name}/{label} k={c.first_failure}")
    report(4, "Lyapunov descent (smooth and composite)", not failures,
           f"{len(traces)} traces, worst margin {worst:.3e} of initial energy"
           + (f"; failures {failures[:3]}" if failures else ""))


def criterion_5():
    failures = []
    worst_rate = 0.0
    traces = [r for r in suite_runs()] + list(lasso_runs())
    for name, label, prob, L, ref, tr in traces:
        chk = ergodic_bound_check(tr, prob.value, ref)
        if chk.result.status is Status.FAIL:
            failures.append(f"{name}/{label} ergodic k={chk.result.first_failure}")
        rw = rate_witness(tr, chk, L)
        if rw.status is not Status.PASS:
            failures.append(f"{name}/{label} rate witness {rw.status.value}")
        if chk.energy_1 > 0:
            worst_rate = max(worst_rate, chk.rate_constant * 2 * (1.0 / (SQRT2 * L)) / chk.energy_1)
    report(5, "ergodic bounds and O(1/k) witness", not failures,
           f"{len(traces)} traces, max k*gap as fraction of its bound {worst_rate:.3e}"
           + (f"; failures {failures[:3]}" if failures else ""))


def criterion_6():
    rng = np.random.default_rng(2024)
    n_each = 5000
    violations = 0
    tested = 0
    ap = 10.0 ** rng.uniform(-6, 6, 2 * n_each)
    th = np.concatenate([rng.uniform(0, 10, n_each), 10.0 ** rng.uniform(-6, 4, n_each)])
    frac = np.concatenate([rng.uniform(0.5, 1.0, n_each), rng.uniform(1e-6, 0.5, n_each)])
    for a, t, f in zip(ap, th, frac):
        lam = float(f * a)
        case = classify(lam, float(a))
        if case is CaseTag.CASE_II:
            two = adabb_step(lam, a, t, OPTION_II, OPTION_II).alpha_k
            one = adabb_step(lam, a, t, OPTION_I, OPTION_II).alpha_k
        elif case is CaseTag.CASE_III:
            two = adabb_step(lam, a, t, OPTION_II, OPTION_II).alpha_k
            one = adabb_step(lam, a, t, OPTION_II, OPTION_I).alpha_k
        else:
            continue
        tested += 1
        violations += not (two <= one)
    report(6, "Option II never exceeds Option I (exact)", violations == 0 and tested >= 9900,
           f"{tested} triples in Cases ii/iii, {violations} violations")


def criterion_7():
    failures, worst = [], math.inf
    traces = [r for r in suite_runs()] + list(lasso_runs())
    for name, label, prob, L, ref, tr in traces:
        c = containment_check(tr, ref, rtol=1e-10)
        worst = min(worst, c.worst_margin)
        if c.status is Status.FAIL:
            failures.append(f"{name}/{label} k={c.first_failure}")
    report(7, "iterates stay in the containment ball", not failures,
           f"{len(traces)} traces, smallest relative slack {worst:.3e}"
           + (f"; failures {failures[:3]}" if failures else ""))


def criterion_8():
    cap_fail, slopes = [], []
    for name, label, q, L, ref, tr in sc_runs():
        mu = q.mu
        a = tr.alphas[1:]
        if np.any(a > 1.0 / mu + 1e-12):
            cap_fail.append(name)
        dist = np.linalg.norm(tr.iterates() - ref.x_star, axis=1)
        k = np.arange(len(dist))
        sel = (k >= 10) & (k <= 200) & (dist > 0)
        slopes.append(float(np.polyfit(k[sel], np.log(dist[sel]), 1)[0]))
    ok = not cap_fail and all(s < 0 for s in slopes)
    report(8, "strongly convex rule: alpha_k <= 1/mu and linear convergence", ok,
           f"mu=0.1 L=10 n=20, 3 seeds, max alpha*mu "
           f"{max(float(np.max(r[5].alphas[1:])) * r[2].mu for r in sc_runs()):.4f}, "
           f"log-distance slopes {', '.join(f'{s:.3f}' for s in slopes)}")


def criterion_9():
    p = synthetic_lasso(100, 50, 10, seed=0)
    x0 = np.zeros(p.n)
    tr = run(p, x0, RunConfig("AdaPBB", max_iter=2000))
    X = tr.iterates()
    resid = np.linalg.norm(np.diff(X, axis=0), axis=1) / tr.alphas[:-1]
    hit = np.nonzero(resid <= 1e-8)[0]
    ref_tr = reference_run(p, x0, max_iter=50_000, grad_tol=1e-13)
    best = min(range(len(ref_tr)), key=lambda i: ref_tr[i].grad_norm)
    F_ref = ref_tr[best].objective
    x_ref = ref_tr[best].x
    nnz = int(np.sum(np.abs(x_ref) > 1e-10))
    gap = abs(tr.final.objective - F_ref)
    ok = hit.size > 0 and gap <= 1e-8
    report(9, "proximal rule on desk lasso", ok,
           f"residual <= 1e-8 at k={int(hit[0]) + 1 if hit.size else None}, |F - F_ref| = {gap:.2e}, "
           f"solution nnz={nnz}, unit-step residual {p.prox_residual(tr.final.x):.2e}")


def criterion_10():
    p = synthetic_logistic(500, 50, seed=0)
    x0 = np.zeros(p.n)
    ref = reference_solution(p, x0)
    iters = {}
    for label, reset in (("AdaBB", True), ("AdaBB", False), ("GD", False)):
        tr = run(p, x0, RunConfig(label, max_iter=20_000, theta1_reset=reset))
        iters[(label, reset)] = iterations_to_gap(tr.objectives, ref.f_star, 1e-10)
    gd = iters[("GD", False)]
    ada = [iters[("AdaBB", True)], iters[("AdaBB", False)]]
    logistic_ok = gd is not None and all(i is not None and i < gd for i in ada)
    cubic = build_cubic_from_logistic(p, np.zeros(p.n), 10.0)
    cubic_res = {}
    for label in ("AdaBB", "AdaBB3", "AdGD", "AdaPGM"):
        tr = run(cubic, np.zeros(p.n), RunConfig(label, max_iter=5000, grad_tol=1e-8))
        cubic_res[label] = (tr.stop_reason, len(tr) - 1)
    cubic_ok = all(r is StopReason.GRAD_TOL for r, _ in cubic_res.values())
    report(10, "protocol shape: AdaBB beats GD(1/L); cubic subproblem converges", logistic_ok and cubic_ok,
           f"iterations to gap 1e-10: AdaBB {ada[0]} (theta1 reset) / {ada[1]}, GD(1/L) {gd}; cubic M=10: "
           + ", ".join(f"{k} {v[1]} it {v[0].value}" for k, v in cubic_res.items()))


def criterion_11():
    q = QuadraticProblem(np.ones(2), np.zeros(2))
    tr = run(q, np.array([1.0, 0.0]), RunConfig("AdaBB", alpha_0=0.1, max_iter=3))
    lam1, a1 = tr[1].lambda_k, tr.alphas[1]
    errs = [abs(a1 - lam1 / SQRT2) / lam1]
    fixture_ok = errs[0] <= 1e-15 and abs(a1 - 1 / SQRT2) <= 1e-15
    for name, label, prob, L, ref, t in general_runs():
        lam1 = t[1].lambda_k
        if lam1 >= SQRT2 * t.alphas[0]:
            errs.append(abs(t.alphas[1] - lam1 / SQRT2) / lam1)
    ok = fixture_ok and max(errs) <= 1e-15
    report(11, "first step equals lambda_1/sqrt2", ok,
           f"identity fixture alpha_1 = {float(tr.alphas[1])!r}, worst relative error {max(errs):.2e} over {len(errs)} runs")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8,
            criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 12)])
def test_acceptance(criterion):
    criterion()


if __name__ == "__main__":
    failed = 0
    for crit in CRITERIA:
        try:
            crit()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
