"""Adaptive Barzilai-Borwein gradient methods with baselines and diagnostics."""

from .core import CaseTag, IterateState, RunTrace, SecantInfo, StopReason, local_lipschitz, long_bb, short_bb
from .exceptions import (AdaBBError, BoundViolation, DegenerateStep, InvalidState, LabelError, LedgerMismatch,
                         LineSearchStall, NoConvergenceWarning, NoViableStepsize, ParseError, RequiresReference)
from .stepsize import ControllerKind, Method, adabb_sc_step, adabb_step, adapbb_step, next_step, theta0_init
from .solvers import RunConfig, reference_run, run, run_composite, run_smooth, tune_fixed_stepsize
from .problems import (Composite, CubicSubproblem, L1Norm, LassoProblem, LeastSquares, LogisticProblem,
                       QuadraticProblem, build_cubic_from_logistic, certify_lipschitz, power_iteration,
                       random_quadratic, synthetic_lasso, synthetic_logistic)
from .dataio import Dataset, parse_libsvm, write_libsvm

__version__ = "0.1.0"

__all__ = [
    "AdaBBError", "BoundViolation", "CaseTag", "Composite", "ControllerKind", "CubicSubproblem", "Dataset",
    "DegenerateStep", "InvalidState", "IterateState", "L1Norm", "LabelError", "LassoProblem", "LeastSquares",
    "LedgerMismatch", "LineSearchStall", "LogisticProblem", "Method", "NoConvergenceWarning", "NoViableStepsize",
    "ParseError", "QuadraticProblem", "RequiresReference", "RunConfig", "RunTrace", "SecantInfo", "StopReason",
    "adabb_sc_step", "adabb_step", "adapbb_step", "build_cubic_from_logistic", "certify_lipschitz",
    "local_lipschitz", "long_bb", "next_step", "parse_libsvm", "power_iteration", "random_quadratic",
    "reference_run", "run", "run_composite", "run_smooth", "short_bb", "synthetic_lasso", "synthetic_logistic",
    "theta0_init", "tune_fixed_stepsize", "write_libsvm",
]
