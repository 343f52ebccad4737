"""Exception hierarchy shared by all modules."""

from __future__ import annotations

import numpy as np


class NsMinimaxError(Exception):
    """Base class for every error raised by the package."""


class InputError(NsMinimaxError, ValueError):
    """Malformed arguments: dimension mismatch, violated preconditions."""


class EvaluationError(NsMinimaxError):
    """The functional returned a non-finite value."""

    def __init__(self, point, value=None, message: str | None = None):
        self.point = np.array(point, dtype=float, copy=True)
        self.value = value
        super().__init__(message or f"non-finite evaluation {value!r} at point {self.point.tolist()}")


class DegenerateSamplingError(NsMinimaxError):
    """No sampled point produced a usable gradient."""


class DegenerateGapError(NsMinimaxError):
    """lambda_k == lambda_{k+1}: the eigenspace split is not well defined."""

    def __init__(self, k: int, lam_k: float, lam_kp1: float):
        self.k, self.lam_k, self.lam_kp1 = k, lam_k, lam_kp1
        super().__init__(f"no spectral gap at k={k}: lambda_k={lam_k!r}, lambda_k+1={lam_kp1!r}")


class AntiCoercivityError(NsMinimaxError):
    """Every inner ascent trajectory escaped the ball of radius r_max."""


class SelectionFailure(NsMinimaxError):
    """The perturbed (minimal-norm) selection could not find a feasible point."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class LscFailureError(NsMinimaxError):
    """The lower semicontinuity probe reported violations."""

    def __init__(self, message: str, violations=()):
        self.violations = list(violations)
        super().__init__(message)


class NonConvergenceError(NsMinimaxError):
    """Outer minimization hit its iteration cap."""

    def __init__(self, message: str, trace=None):
        self.trace = trace if trace is not None else []
        super().__init__(message)


class HypothesisFailure(NsMinimaxError):
    """A sampled hypothesis check failed and the caller did not force the run."""

    def __init__(self, message: str, reports=()):
        self.reports = list(reports)
        super().__init__(message)


class ExpressionError(InputError):
    """Syntax error or unknown identifier in an expression; position is 1-based."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class StageError(NsMinimaxError):
    """Wraps an error raised inside one stage of the saddle driver."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
