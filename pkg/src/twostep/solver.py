"""Two-step Newton iteration for square nonlinear systems ``F(x) = 0``.

Each outer iteration factors ``F'(x_k)`` once and reuses it twice::

    y_k     = x_k - F'(x_k)^{-1} F(x_k)
    x_{k+1} = y_k - F'(x_k)^{-1} F(y_k)

Norms are infinity norms throughout so traces can be compared with the
scalar majorizing sequence of a :class:`~twostep.majorant.ConvergenceCertificate`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import linalg
from .exceptions import (
    CriterionViolated,
    DimensionMismatch,
    InsufficientData,
    MaxIterations,
    SingularJacobian,
    SingularMatrix,
)
from .majorant import ConvergenceCertificate, majorizing_sequence

__all__ = [
    "ProblemDefinition",
    "SolveOptions",
    "IterationTrace",
    "MajorizationReport",
    "two_step_newton",
    "check_majorization",
    "estimate_order",
]

TRACE_COLUMNS = ("k", "step_y", "step_corr", "step_total", "residual")
MAJORANT_COLUMNS = ("s_minus_t", "tcorr", "tstep", "t_gap")


@dataclass
class ProblemDefinition:
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray

    def __post_init__(self):
        self.x0 = linalg.as_vector(self.x0, "x0")

    @property
    def dimension(self):
        return self.x0.size


@dataclass
class SolveOptions:
    """Stopping rule: relative step AND absolute residual must both pass.

    ``plain_newton`` skips the correction half-step (reference mode for
    comparisons only).
    """

    step_tol: float = 1e-12
    residual_tol: float = 1e-12
    max_iter: int = 100
    certificate: Optional[ConvergenceCertificate] = None
    plain_newton: bool = False
    record_iterates: bool = False

    def __post_init__(self):
        if not (self.step_tol > 0 and self.residual_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class IterationTrace:
    """Per-iteration norms; row ``k`` describes the passage ``x_k -> x_{k+1}``."""

    step_y: list = field(default_factory=list)
    step_corr: list = field(default_factory=list)
    step_total: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    #: ||F(x_0)||, kept apart so ``residual[k]`` is always ||F(x_{k+1})||
    initial_residual: float = math.nan
    #: distance ||x_{k+1} - x_0|| for every row
    drift: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    majorant: Optional[dict] = None

    def __len__(self):
        return len(self.step_total)

    def _append(self, step_y, step_corr, step_total, residual, drift):
        self.step_y.append(step_y)
        self.step_corr.append(step_corr)
        self.step_total.append(step_total)
        self.residual.append(residual)
        self.drift.append(drift)

    def attach_majorant(self, cert: ConvergenceCertificate):
        """Add the scalar majorant columns, padded with NaN past its end."""
        seq = majorizing_sequence(cert)
        t, s = seq.t, seq.s
        cols = {name: [] for name in MAJORANT_COLUMNS}
        for k in range(len(self)):
            if k < len(s):
                cols["s_minus_t"].append(s[k] - t[k])
                cols["tcorr"].append(t[k + 1] - s[k])
                cols["tstep"].append(t[k + 1] - t[k])
            else:
                for name in MAJORANT_COLUMNS[:3]:
                    cols[name].append(math.nan)
            cols["t_gap"].append(cert.t_star - t[k] if k < len(t) else math.nan)
        self.majorant = cols

    def rows(self):
        names = TRACE_COLUMNS + (MAJORANT_COLUMNS if self.majorant else ())
        for k in range(len(self)):
            row = [k, self.step_y[k], self.step_corr[k], self.step_total[k], self.residual[k]]
            if self.majorant:
                row += [self.majorant[name][k] for name in MAJORANT_COLUMNS]
            yield dict(zip(names, row))

    def to_csv(self, fp=None) -> str:
        names = TRACE_COLUMNS + (MAJORANT_COLUMNS if self.majorant else ())
        out = io.StringIO() if fp is None else fp
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(names)
        for row in self.rows():
            writer.writerow([row["k"]] + [f"{row[c]:.10e}" for c in names[1:]])
        return out.getvalue() if fp is None else ""


def _residual(problem, x):
    fx = np.asarray(problem.residual(x), dtype=np.float64)
    if fx.shape != x.shape:
        raise DimensionMismatch(f"F returned shape {fx.shape}, expected {x.shape}")
    return fx


def two_step_newton(problem: ProblemDefinition, opts: Optional[SolveOptions] = None):
    """Run the two-step Newton iteration from ``problem.x0``.

    Returns
    -------
    x : ndarray
        Last iterate.
    trace : IterationTrace

    Raises
    ------
    SingularJacobian
        With the partial trace attached, if ``F'(x_k)`` cannot be factored.
    MaxIterations
        With the full trace attached.
    """
    opts = opts or SolveOptions()
    x0 = problem.x0.copy()
    x = x0
    fx = _residual(problem, x)
    trace = IterationTrace(initial_residual=linalg.inf_norm(fx))
    if opts.record_iterates:
        trace.iterates.append(x.copy())

    converged = not np.any(fx)
    k = 0
    while not converged:
        if k >= opts.max_iter:
            _finish(trace, opts)
            raise MaxIterations(opts.max_iter, trace)
        jac = np.asarray(problem.jacobian(x), dtype=np.float64)
        if jac.shape != (x.size, x.size):
            raise DimensionMismatch(f"jacobian has shape {jac.shape}, expected {(x.size, x.size)}")
        try:
            lu = linalg.lu_factor(jac)
        except (SingularMatrix, ValueError) as exc:
            _finish(trace, opts)
            raise SingularJacobian(k, trace) from exc

        y = x - linalg.lu_solve(lu, fx)
        if opts.plain_newton:
            x_next = y
        else:
            x_next = y - linalg.lu_solve(lu, _residual(problem, y))
        fx = _residual(problem, x_next)

        step_total = linalg.inf_norm(x_next - x)
        res = linalg.inf_norm(fx)
        trace._append(
            linalg.inf_norm(y - x),
            linalg.inf_norm(x_next - y),
            step_total,
            res,
            linalg.inf_norm(x_next - x0),
        )
        if opts.record_iterates:
            trace.iterates.append(x_next.copy())
        x = x_next
        k += 1
        rel_step = step_total / max(1.0, linalg.inf_norm(x))
        converged = (rel_step <= opts.step_tol and res <= opts.residual_tol) or not np.any(fx)

    _finish(trace, opts)
    return x, trace


def _finish(trace, opts):
    if opts.certificate is not None and opts.certificate.criterion_holds:
        trace.attach_majorant(opts.certificate)


@dataclass
class MajorizationReport:
    """Row ``k`` holds the three inequality checks for step ``k``.

    ``None`` marks steps beyond the recorded majorizing sequence.
    """

    y_step: list = field(default_factory=list)
    corr_step: list = field(default_factory=list)
    total_step: list = field(default_factory=list)
    drift: list = field(default_factory=list)

    def __len__(self):
        return len(self.total_step)

    @property
    def all_hold(self):
        return all(
            v is not False
            for col in (self.y_step, self.corr_step, self.total_step, self.drift)
            for v in col
        )


def check_majorization(trace: IterationTrace, cert: ConvergenceCertificate) -> MajorizationReport:
    """Compare operator steps with the scalar majorant, step by step.

    Checks ``||y_k - x_k|| <= s_k - t_k``, ``||x_{k+1} - y_k|| <= t_{k+1} - s_k``,
    ``||x_{k+1} - x_k|| <= t_{k+1} - t_k`` and ``||x_{k+1} - x_0|| <= t_{k+1}``
    with slack ``1e-12 * max(1, t*)``. Failures are reported, never raised.
    """
    if not cert.criterion_holds:
        raise CriterionViolated("majorization needs a certificate with beta <= b")
    seq = majorizing_sequence(cert)
    t, s = seq.t, seq.s
    slack = 1e-12 * max(1.0, cert.t_star)
    report = MajorizationReport()
    for k in range(len(trace)):
        if k < len(s):
            report.y_step.append(trace.step_y[k] <= s[k] - t[k] + slack)
            report.corr_step.append(trace.step_corr[k] <= t[k + 1] - s[k] + slack)
            report.total_step.append(trace.step_total[k] <= t[k + 1] - t[k] + slack)
            report.drift.append(trace.drift[k] <= t[k + 1] + slack)
        else:
            # majorant already at t* within round-off: only the ball bound remains
            report.y_step.append(None)
            report.corr_step.append(None)
            report.total_step.append(None)
            report.drift.append(trace.drift[k] <= cert.t_star + slack)
    return report


def estimate_order(errors) -> float:
    """Least-squares slope of ``log e_{k+1}`` against ``log e_k``.

    Needs at least three strictly decreasing errors, each above 1e-13.
    """
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size < 3:
        raise InsufficientData(f"need at least 3 errors, got {e.size}")
    if not np.all(np.isfinite(e)) or np.any(e <= 1e-13):
        raise InsufficientData("errors must be finite and above the 1e-13 round-off floor")
    if np.any(np.diff(e) >= 0):
        raise InsufficientData("errors must be strictly decreasing")
    logs = np.log10(e)
    x, y = logs[:-1], logs[1:]
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
