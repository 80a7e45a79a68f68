"""Command line entry point: ``adabb run|verify|tune --config <file>``.

Experiments are described by TOML files; see ``src/adabb/configs`` for the
shipped presets and the README for the schema.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .core import RunTrace
from .dataio import logistic_problem_from, parse_libsvm
from .diagnostics import (CheckResult, Status, compute_ledger, containment_check,
                          ergodic_bound_check, iterations_to_gap, ledger_branch, ledger_checks, lyapunov_sequence,
                          rate_witness, reference_solution, verify_stepsize_bounds)
from .exceptions import AdaBBError, InvalidState, LineSearchStall, NoViableStepsize
from .problems import (QuadraticProblem, build_cubic_from_logistic, gamma_from_rule,
                       random_quadratic, synthetic_lasso, synthetic_logistic)
from .solvers import RunConfig, run, tune_fixed_stepsize
from .stepsize import ControllerKind, Method

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DATA_ROOT_ENV = "ADABB_DATA_ROOT"
PRESET_DIR = Path(__file__).with_name("configs")
TRACE_HEADER = ("k", "fval", "grad_norm", "alpha", "theta", "lambda", "case")
GAP_TARGET = 1e-8
RESIDUAL_FLOOR = 1e-17


class ConfigError(AdaBBError, ValueError):
    """Invalid experiment configuration or missing data."""


def fmt(v) -> str:
    """17 significant digits, which round-trips every double."""
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentSpec:
    name: str
    problem: dict
    controllers: list[str]
    alpha_0: float = 1e-10
    max_iter: int = 1000
    grad_tol: float = 0.0
    theta1_reset: bool = True
    alpha0_probe_reset: bool = False
    fixed_alpha: Any = "1/L"
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = "out"
    x0: Any = "zeros"
    verify: bool = False
    verify_grad_rtol: float = 1e-10
    tune: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.controllers:
            raise ConfigError("at least one controller is required")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not self.alpha_0 > 0:
            raise ConfigError(f"alpha_0 must be positive, got {self.alpha_0}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if "kind" not in self.problem:
            raise ConfigError("problem.kind is required")
        for c in self.controllers:
            try:
                ControllerKind.parse(c)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data: dict, out: Optional[str] = None, seed: Optional[int] = None) -> "ExperimentSpec":
        runs = dict(data.get("run", {}))
        known = {"controllers", "alpha_0", "max_iter", "grad_tol", "theta1_reset", "alpha0_probe_reset",
                 "fixed_alpha", "seeds", "x0"}
        unknown = set(runs) - known
        if unknown:
            raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")
        verify = data.get("verify", {})
        seeds = [int(seed)] if seed is not None else [int(s) for s in runs.pop("seeds", [0])]
        runs.pop("seeds", None)
        return cls(
            name=str(data.get("name", data.get("problem", {}).get("kind", "experiment"))),
            problem=dict(data.get("problem", {})),
            controllers=[str(c) for c in runs.pop("controllers", [])],
            seeds=seeds,
            output_dir=out if out is not None else str(data.get("output_dir", "out")),
            verify=bool(verify.get("enabled", False)),
            verify_grad_rtol=float(verify.get("grad_rtol", 1e-10)),
            tune=dict(data.get("tune", {})),
            **runs,
        )


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        preset = PRESET_DIR / f"{path}.toml"
        if preset.exists():
            p = preset
        else:
            raise ConfigError(f"config {path!r} not found (and no preset of that name)")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None


# ---------------------------------------------------------------------------
# problems


@dataclass
class BuiltProblem:
    problem: Any
    x0: np.ndarray
    problem_id: str
    lipschitz: Optional[float]

    @property
    def composite(self) -> bool:
        return hasattr(self.problem, "prox")

    def objective(self, x) -> float:
        return float(self.problem.value(x))


def _data_path(path: str) -> Path:
    p = Path(path)
    if not p.is_absolute():
        root = os.environ.get(DATA_ROOT_ENV)
        p = Path(root) / p if root else p
    if not p.exists():
        raise ConfigError(f"data file {str(p)!r} not found (set {DATA_ROOT_ENV} to the dataset directory)")
    return p


def _logistic(cfg: dict, seed: int):
    kind = cfg.get("kind")
    gamma = cfg.get("gamma", "L/m")
    if kind == "synthetic-logistic":
        prob = synthetic_logistic(int(cfg.get("m", 500)), int(cfg.get("n", 50)), seed=seed, gamma=0.0)
    elif kind == "libsvm-logistic":
        if "path" not in cfg:
            raise ConfigError("libsvm-logistic needs problem.path")
        ds = parse_libsvm(_data_path(str(cfg["path"])), n_features=cfg.get("n_features"))
        prob = logistic_problem_from(ds, 0.0)
    else:
        raise ConfigError(f"expected a logistic problem, got kind {kind!r}")
    prob.gamma = gamma_from_rule(prob, gamma) if isinstance(gamma, str) else float(gamma)
    return prob


def _initial_point(spec_x0, n: int, seed: int) -> np.ndarray:
    if isinstance(spec_x0, list):
        x0 = np.asarray(spec_x0, dtype=np.float64)
        if x0.size != n:
            raise ConfigError(f"x0 has {x0.size} entries, problem has {n}")
        return x0
    if spec_x0 == "zeros":
        return np.zeros(n)
    if spec_x0 == "ones":
        return np.ones(n)
    if spec_x0 == "e1":
        x0 = np.zeros(n)
        x0[0] = 1.0
        return x0
    if spec_x0 == "random":
        return np.random.default_rng(seed).standard_normal(n)
    raise ConfigError(f"unknown x0 {spec_x0!r}")


def build_problem(spec: ExperimentSpec, seed: int) -> BuiltProblem:
    cfg = spec.problem
    kind = cfg["kind"]
    if kind in ("synthetic-logistic", "libsvm-logistic"):
        prob = _logistic(cfg, seed)
        L = prob.lipschitz_hint
    elif kind == "quadratic":
        n = int(cfg.get("n", 20))
        if cfg.get("identity", False):
            prob = QuadraticProblem(np.ones(n), np.zeros(n))
        else:
            prob = random_quadratic(n, float(cfg.get("mu", 0.1)), float(cfg.get("L", 10.0)), seed=seed)
        L = prob.lipschitz_hint
    elif kind == "cubic":
        source = cfg.get("source")
        if not isinstance(source, dict):
            raise ConfigError("cubic needs a [problem.source] table describing a logistic problem")
        logistic = _logistic(source, seed)
        prob = build_cubic_from_logistic(logistic, np.zeros(logistic.n), float(cfg.get("M", 10.0)))
        L = None
    elif kind == "lasso":
        prob = synthetic_lasso(int(cfg.get("m", 100)), int(cfg.get("n", 50)), int(cfg.get("nnz", 10)), seed=seed,
                               tau_fraction=float(cfg.get("tau_fraction", 0.1)), noise=float(cfg.get("noise", 0.05)))
        L = prob.lipschitz_hint
    else:
        raise ConfigError(f"unknown problem kind {kind!r}")
    pid = safe_name(spec.name) + (f"-s{seed}" if len(spec.seeds) > 1 else "")
    return BuiltProblem(prob, _initial_point(spec.x0, prob.n, seed), pid, L)


def _fixed_alpha(spec: ExperimentSpec, built: BuiltProblem) -> float:
    choice = spec.fixed_alpha
    if choice == "1/L":
        if built.lipschitz is None:
            raise ConfigError(f"{built.problem_id}: fixed-step GD with 1/L needs a global constant; "
                              "use fixed_alpha = \"tuned\" or a number")
        return 1.0 / built.lipschitz
    if choice == "tuned":
        path = Path(spec.output_dir) / "tune.json"
        try:
            return float(json.loads(path.read_text())[built.problem_id])
        except (OSError, KeyError, ValueError):
            raise ConfigError(f"no tuned stepsize for {built.problem_id} in {path}; run `adabb tune` first") from None
    return float(choice)


def controller_for(spec: ExperimentSpec, label: str, built: BuiltProblem) -> ControllerKind:
    kind = ControllerKind.parse(label)
    if kind.method is Method.FIXED and kind.alpha is None:
        kind = kind.with_alpha(_fixed_alpha(spec, built))
    if built.composite and kind.method in (Method.ADABB, Method.ADABB_SC, Method.ARMIJO, Method.BB_GLL):
        raise ConfigError(f"{label} has no proximal form; use AdaPBB or AdaPGM for composite problems")
    return kind


def run_config(spec: ExperimentSpec, kind: ControllerKind, verify: bool = False,
               grad_tol: Optional[float] = None) -> RunConfig:
    alpha_0 = spec.alpha_0
    if kind.method in (Method.ARMIJO, Method.BB_GLL) and spec.alpha_0 < 1e-6:
        alpha_0 = 1.0  # line searches start from a unit trial
    return RunConfig(kind, alpha_0=alpha_0, max_iter=spec.max_iter,
                     grad_tol=spec.grad_tol if grad_tol is None else grad_tol,
                     theta1_reset=spec.theta1_reset and not verify,
                     alpha0_probe_reset=spec.alpha0_probe_reset)


def execute(built: BuiltProblem, cfg: RunConfig) -> tuple[RunTrace, str, float]:
    """Run one controller; line-search stalls become a recorded stop reason."""
    start = time.perf_counter()
    try:
        trace = run(built.problem, built.x0, cfg, built.problem_id)
        reason = trace.stop_reason.value
    except LineSearchStall as exc:
        trace = exc.trace
        reason = "LineSearchStall"
    return trace, reason, time.perf_counter() - start


# ---------------------------------------------------------------------------
# outputs


def write_trace_csv(path: Path, trace: RunTrace, f_star: Optional[float] = None, plot_data: bool = False) -> None:
    header = list(TRACE_HEADER)
    if plot_data:
        header += ["residual", "log10_residual", "grad_evals", "value_evals"]
    lines = [",".join(header)]
    for s in trace.states:
        row = [str(s.k), fmt(s.objective), fmt(s.grad_norm), fmt(s.alpha_k), fmt(s.theta_k), fmt(s.lambda_k),
               s.case_tag.value]
        if plot_data:
            res = max(s.objective - f_star, RESIDUAL_FLOOR) if f_star is not None else math.nan
            row += [fmt(res), fmt(math.log10(res)), str(s.grad_evals), str(s.value_evals)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


SUMMARY_HEADER = ("problem", "controller", "iterations", "stop_reason", "final_fval", "f_star", "final_gap",
                  "iters_to_1e-8", "wall_time_s", "grad_evals", "value_evals")


def cmd_run(spec: ExperimentSpec, plot_data: bool = False, stream=None) -> int:
    stream = stream or sys.stdout
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = [",".join(SUMMARY_HEADER)]
    for seed in spec.seeds:
        built = build_problem(spec, seed)
        results = []
        for label in spec.controllers:
            kind = controller_for(spec, label, built)
            trace, reason, wall = execute(built, run_config(spec, kind))
            results.append((label, trace, reason, wall))
        finals = [tr.final.objective for _, tr, _, _ in results if len(tr) and math.isfinite(tr.final.objective)]
        f_star = min(finals) if finals else math.nan
        for label, trace, reason, wall in results:
            write_trace_csv(out / f"{built.problem_id}_{safe_name(label)}.csv", trace, f_star, plot_data)
            hit = iterations_to_gap(trace.objectives, f_star, GAP_TARGET) if len(trace) else None
            final = trace.final.objective if len(trace) else math.nan
            summary.append(",".join([
                built.problem_id, label, str(len(trace) - 1), reason, fmt(final), fmt(f_star), fmt(final - f_star),
                "" if hit is None else str(hit), f"{wall:.6f}",
                str(trace.metadata.get("grad_evals", "")), str(trace.metadata.get("value_evals", "")),
            ]))
            print(f"{built.problem_id:<20} {label:<14} iters={len(trace) - 1:<6} stop={reason:<16} "
                  f"gap={final - f_star:.3e}", file=stream)
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    return 0


def verify_trace(trace: RunTrace, built: BuiltProblem, ref) -> list[CheckResult]:
    """Every invariant check applicable to ``trace``; inapplicable ones are SKIPPED."""
    checks: list[CheckResult] = []
    try:
        ledger_branch(trace.controller)
        family = len(trace) >= 2
    except InvalidState:
        family = False
    if family:
        rows = compute_ledger(trace, check=False)
        checks += ledger_checks(trace, rows)
        checks.append(lyapunov_sequence(trace, ref, rows).check())
        checks.append(containment_check(trace, ref))
        erg = ergodic_bound_check(trace, built.objective, ref)
        checks.append(erg.result)
        checks.append(rate_witness(trace, erg, built.lipschitz))
    else:
        why = f"no energy ledger for {trace.controller}" if len(trace) >= 2 else "no iterations"
        for name in ("ledger identities", "energy descent", "containment radius", "ergodic bound", "rate witness"):
            checks.append(CheckResult(name, Status.SKIPPED, detail=why))
    checks += verify_stepsize_bounds(trace, built.lipschitz).checks
    return checks


def cmd_verify(spec: ExperimentSpec, stream=None) -> int:
    stream = stream or sys.stdout
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    failed = False
    for seed in spec.seeds:
        built = build_problem(spec, seed)
        ref = reference_solution(built.problem, built.x0)
        g0 = np.linalg.norm(built.problem.smooth.gradient(built.x0) if built.composite
                            else built.problem.gradient(built.x0))
        tol = max(spec.grad_tol, spec.verify_grad_rtol * g0)
        for label in spec.controllers:
            kind = controller_for(spec, label, built)
            trace, reason, _ = execute(built, run_config(spec, kind, verify=True, grad_tol=tol))
            checks = verify_trace(trace, built, ref)
            lines = [f"# problem={built.problem_id} controller={label} iterations={len(trace) - 1} stop={reason}",
                     f"# reference={ref.source.value} f_star={fmt(ref.f_star)} "
                     f"L={'none' if built.lipschitz is None else fmt(built.lipschitz)}"]
            lines += [c.line() for c in checks]
            bad = [c for c in checks if c.status is Status.FAIL]
            failed = failed or bool(bad)
            (out / f"verify_{built.problem_id}_{safe_name(label)}.txt"
             if len(spec.seeds) > 1 else out / f"verify_{safe_name(label)}.txt").write_text("\n".join(lines) + "\n")
            print(f"{built.problem_id:<20} {label:<14} {'FAIL' if bad else 'PASS'} "
                  f"({sum(c.status is Status.PASS for c in checks)} pass, {len(bad)} fail, "
                  f"{sum(c.status is Status.SKIPPED for c in checks)} skipped)", file=stream)
    return 1 if failed else 0


def cmd_tune(spec: ExperimentSpec, stream=None) -> int:
    stream = stream or sys.stdout
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "tune.json"
    stored = json.loads(path.read_text()) if path.exists() else {}
    t = spec.tune
    for seed in spec.seeds:
        built = build_problem(spec, seed)
        alpha = tune_fixed_stepsize(built.problem, built.x0, float(t.get("grid_lo", 0.1)), float(t.get("grid_hi", 10.0)),
                                    int(t.get("grid_n", 10)), int(t.get("probe_iters", max(1, spec.max_iter // 2))))
        stored[built.problem_id] = alpha
        print(f"{built.problem_id}: {fmt(alpha)}", file=stream)
    path.write_text(json.dumps(stored, indent=2, sort_keys=True) + "\n")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adabb", description="Adaptive Barzilai-Borwein gradient experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run every controller and write traces plus summary.csv"),
                       ("verify", "check the theoretical invariants on fresh runs"),
                       ("tune", "pick a fixed GD stepsize from a log-spaced grid")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="TOML experiment file or shipped preset name")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="single seed (overrides run.seeds)")
        if name == "run":
            p.add_argument("--plot-data", action="store_true", help="add residual and oracle-count columns")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        spec = ExperimentSpec.from_dict(load_config(args.config), out=args.out, seed=args.seed)
        if args.command == "run":
            return cmd_run(spec, plot_data=args.plot_data)
        if args.command == "verify":
            return cmd_verify(spec)
        return cmd_tune(spec)
    except NoViableStepsize as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, InvalidState, AdaBBError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
