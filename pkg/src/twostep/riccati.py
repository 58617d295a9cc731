"""Minimal positive solution of the transport-theory Riccati equation.

The equation ``XCX - XD - AX + B = 0`` with

    A = Delta - e q^T,   B = e e^T,   C = q q^T,   D = Gamma - q e^T

has its minimal positive solution of the form ``X = T o (u v^T)`` where
``T_ij = 1/(delta_i + gamma_j)`` and ``(u, v)`` solves

    u = u o (P v) + e,        v = v o (P~ u) + e.

:func:`solve_minimal` runs the two-step Newton method on that vector system
from ``(0, 0)``. The Jacobian ``I - G`` is eliminated by blocks: the
top-left block is diagonal, so only the ``n x n`` Schur complement

    S = I - G2 - H2 (I - G1)^{-1} H1

is factored, once per outer iteration, and reused for both half-steps.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Real

import numpy as np

from . import linalg
from .exceptions import DimensionMismatch, InvalidSize, MaxIterations, SingularMatrix, SingularSchur
from .majorant import ConstantL, ConvergenceCertificate, certify
from .quadrature import composite_gl4
from .solver import ProblemDefinition

__all__ = [
    "TransportParameters",
    "RiccatiData",
    "MinimalSolution",
    "build_data",
    "f_eval",
    "jacobian_blocks",
    "jacobian",
    "as_problem",
    "solve_minimal",
    "res_metric",
    "assemble_X",
    "ricc_residual",
    "instance_certificate",
    "default_tolerance",
    "write_matrix_csv",
    "EPS",
]

EPS = 2.0**-52


@dataclass(frozen=True)
class TransportParameters:
    """``alpha`` in [0, 1), ``c`` in (0, 1], ``n`` a positive multiple of 4.

    ``alpha`` and ``c`` may be :class:`fractions.Fraction` so that products
    such as ``c (1 + alpha)`` stay exact.
    """

    alpha: Real
    c: Real
    n: int

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha!r}")
        if not 0 < self.c <= 1:
            raise ValueError(f"c must lie in (0, 1], got {self.c!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 4 or self.n % 4:
            raise InvalidSize(f"n must be a positive multiple of 4, got {self.n!r}")

    @property
    def L_beta(self):
        """``c (1 + alpha)``, exact when the inputs are rationals."""
        return self.c * (1 + self.alpha)


@dataclass(frozen=True, eq=False)
class RiccatiData:
    params: TransportParameters
    nodes: np.ndarray
    weights: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    q: np.ndarray
    P: np.ndarray
    Pt: np.ndarray

    @property
    def n(self):
        return self.q.size

    @cached_property
    def T(self):
        return 1.0 / (self.delta[:, None] + self.gamma[None, :])

    def coefficients(self):
        """Dense ``(A, B, C, D)``; only meant for verification at small n."""
        e = np.ones(self.n)
        A = np.diag(self.delta) - np.outer(e, self.q)
        B = np.outer(e, e)
        C = np.outer(self.q, self.q)
        D = np.diag(self.gamma) - np.outer(self.q, e)
        return A, B, C, D


def build_data(p: TransportParameters) -> RiccatiData:
    rule = composite_gl4(p.n)
    w, cw = rule.nodes, rule.weights
    alpha, c = float(p.alpha), float(p.c)
    delta = 1.0 / (c * w * (1.0 + alpha))
    gamma = 1.0 / (c * w * (1.0 - alpha))
    q = cw / (2.0 * w)
    P = q[None, :] / (delta[:, None] + gamma[None, :])
    Pt = q[None, :] / (gamma[:, None] + delta[None, :])
    return RiccatiData(p, w, cw, delta, gamma, q, P, Pt)


def _split(d, u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (d.n,) or v.shape != (d.n,):
        raise DimensionMismatch(f"u, v must have shape ({d.n},), got {u.shape}, {v.shape}")
    return u, v


def f_eval(d: RiccatiData, u, v) -> np.ndarray:
    """Residual of the vector system, stacked ``[u-part, v-part]``."""
    u, v = _split(d, u, v)
    return np.concatenate([u - u * (d.P @ v) - 1.0, v - v * (d.Pt @ u) - 1.0])


def jacobian_blocks(d: RiccatiData, u, v):
    """Blocks of ``G`` in ``f'(u, v) = I - G``.

    Returns ``(g1, g2, H1, H2)`` where ``G1 = diag(g1)`` and ``G2 = diag(g2)``
    are returned as their diagonals.
    """
    u, v = _split(d, u, v)
    return d.P @ v, d.Pt @ u, u[:, None] * d.P, v[:, None] * d.Pt


def jacobian(d: RiccatiData, u, v) -> np.ndarray:
    """Full ``2n x 2n`` Jacobian ``I - G``; used by the generic solver."""
    g1, g2, H1, H2 = jacobian_blocks(d, u, v)
    n = d.n
    J = np.empty((2 * n, 2 * n))
    J[:n, :n] = np.diag(1.0 - g1)
    J[:n, n:] = -H1
    J[n:, :n] = -H2
    J[n:, n:] = np.diag(1.0 - g2)
    return J


def as_problem(d: RiccatiData) -> ProblemDefinition:
    """The vector system as a generic problem started at zero."""
    n = d.n
    return ProblemDefinition(
        residual=lambda w: f_eval(d, w[:n], w[n:]),
        jacobian=lambda w: jacobian(d, w[:n], w[n:]),
        x0=np.zeros(2 * n),
    )


def res_metric(u_k, u_next, v_k, v_next) -> float:
    """Largest relative infinity-norm change of ``u`` and ``v``.

    A zero denominator falls back to the absolute change.
    """
    terms = []
    for old, new in ((u_k, u_next), (v_k, v_next)):
        old = np.asarray(old, dtype=np.float64)
        new = np.asarray(new, dtype=np.float64)
        if old.shape != new.shape:
            raise DimensionMismatch(f"shapes {old.shape} and {new.shape} differ")
        step = linalg.inf_norm(new - old)
        scale = linalg.inf_norm(new)
        terms.append(step / scale if scale > 0 else step)
    return max(terms)


def assemble_X(d: RiccatiData, u, v) -> np.ndarray:
    u, v = _split(d, u, v)
    return d.T * np.outer(u, v)


def ricc_residual(d: RiccatiData, X) -> float:
    """``||XCX - XD - AX + B||_inf`` using the rank-one parts of B, C, D, A."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (d.n, d.n):
        raise DimensionMismatch(f"X must be {d.n}x{d.n}, got {X.shape}")
    Xq = X @ d.q
    qX = d.q @ X
    # XCX = (Xq)(q^T X); XD = X Gamma - (Xq) e^T; AX = Delta X - e (q^T X)
    R = np.outer(Xq, qX + 1.0)
    R -= X * d.gamma[None, :]
    R -= d.delta[:, None] * X
    R += qX[None, :] + 1.0
    return linalg.inf_norm(R)


def default_tolerance(n: int) -> float:
    return math.sqrt(n) / 2.0 * EPS


def instance_certificate(p: TransportParameters) -> ConvergenceCertificate:
    """Lipschitz certificate with ``L = c (1 + alpha)`` and ``beta = 1``."""
    return certify(1.0, ConstantL(float(p.L_beta)))


@dataclass
class MinimalSolution:
    params: TransportParameters
    u: np.ndarray
    v: np.ndarray
    iterations: int
    res_history: list
    riccati_residual: float = math.nan
    t_star: float | None = None
    wall_time_s: float = 0.0
    X: np.ndarray | None = field(default=None, repr=False)
    iterates: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "alpha": float(p.alpha),
            "c": float(p.c),
            "n": int(p.n),
            "L_beta": float(p.L_beta),
            "iterations": self.iterations,
            "res_history": [float(r) for r in self.res_history],
            "riccati_residual": float(self.riccati_residual),
            "t_star": self.t_star,
            "wall_time_s": self.wall_time_s,
        }


def solve_minimal(
    p: TransportParameters,
    *,
    max_iter: int = 100,
    tol: float | None = None,
    plain_newton: bool = False,
    record_iterates: bool = False,
    data: RiccatiData | None = None,
) -> MinimalSolution:
    """Two-step Newton with block elimination, started at ``u = v = 0``.

    Stops when :func:`res_metric` drops to ``tol`` (default
    ``sqrt(n)/2 * 2**-52``). ``plain_newton=True`` stops every outer
    iteration after the first half-step.

    Raises
    ------
    SingularSchur
        If the Schur complement cannot be factored.
    MaxIterations
        After ``max_iter`` outer iterations; the partial solution is
        attached as ``.trace``.
    """
    d = data if data is not None else build_data(p)
    n = d.n
    tol = default_tolerance(n) if tol is None else tol
    P, Pt = d.P, d.Pt
    e = np.ones(n)
    u = np.zeros(n)
    v = np.zeros(n)
    history = []
    iterates = [(u.copy(), v.copy())] if record_iterates else []

    start = time.perf_counter()
    for k in range(max_iter):
        # step 1: G(u_k, v_k); I - G1 and I - G2 are diagonal
        d1 = 1.0 - P @ v
        d2 = 1.0 - Pt @ u
        H1 = u[:, None] * P
        S = -(v[:, None] * (Pt @ (H1 / d1[:, None])))
        S[np.diag_indices(n)] += d2
        try:
            lu = linalg.lu_factor(S)
        except SingularMatrix as exc:
            raise SingularSchur(k, _partial(p, u, v, k, history, iterates)) from exc

        # step 2
        rhs = v * (Pt @ ((e - u * (P @ v)) / d1)) + e - v * (Pt @ u)
        vt = linalg.lu_solve(lu, rhs)
        # step 3
        ut = (u * (P @ (vt - v)) + e) / d1

        if plain_newton:
            u_next, v_next = ut, vt
        else:
            # step 4
            top = ut * (P @ (vt - v)) - u * (P @ vt) + e
            rhs = v * (Pt @ (top / d1)) + vt * (Pt @ (ut - u)) - v * (Pt @ ut) + e
            v_next = linalg.lu_solve(lu, rhs)
            # step 5
            u_next = (ut * (P @ (vt - v)) + e + u * (P @ (v_next - vt))) / d1

        res = res_metric(u, u_next, v, v_next)
        history.append(res)
        u, v = u_next, v_next
        if record_iterates:
            iterates.append((u.copy(), v.copy()))
        if res <= tol:
            break
    else:
        raise MaxIterations(max_iter, _partial(p, u, v, max_iter, history, iterates))
    elapsed = time.perf_counter() - start

    X = assemble_X(d, u, v)
    cert = instance_certificate(p)
    return MinimalSolution(
        params=p,
        u=u,
        v=v,
        iterations=k + 1,
        res_history=history,
        riccati_residual=ricc_residual(d, X),
        t_star=cert.t_star,
        wall_time_s=elapsed,
        X=X,
        iterates=iterates,
    )


def _partial(p, u, v, k, history, iterates):
    return MinimalSolution(params=p, u=u, v=v, iterations=k, res_history=list(history), iterates=iterates)


def write_matrix_csv(X, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(X):
            writer.writerow([f"{x:.16e}" for x in row])
