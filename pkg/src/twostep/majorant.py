"""Majorizing functions built from L-average Lipschitz models.

For a positive nondecreasing rate function ``L`` the majorizing function is

    h(t) = beta - t + int_0^t L(u) (t - u) du
         = beta - t + t * Lambda(t) - W(t),

with ``Lambda(t) = int_0^t L`` and ``W(t) = int_0^t L(u) u du``.  The
constants ``r0`` (``Lambda(r0) = 1``), ``b = W(r0)`` and ``R``
(``h(R) = beta``) fix the convergence criterion ``0 < beta <= b``; the two
zeros ``t* <= r0 <= t**`` of ``h`` give the existence and uniqueness radii.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import scipy.integrate
import scipy.optimize

from .exceptions import CriterionViolated, DomainExceeded, NoRoot, NotApplicable

EPS = 2.0**-52

__all__ = [
    "AverageLipschitzModel",
    "ConstantL",
    "GammaType",
    "Custom",
    "self_concordant",
    "MajorantFunction",
    "ConvergenceCertificate",
    "MajorizingTrace",
    "eval_h",
    "eval_h_prime",
    "eval_h_double_prime",
    "model_constants",
    "solve_roots",
    "certify",
    "majorizing_sequence",
    "scalar_cubic_bound_check",
    "lipschitz_cubic_coefficient",
    "gamma_H_star",
    "gamma_q",
    "CUBIC_GAMMA_THRESHOLD",
]

#: alpha = beta * gamma below which the gamma-model certifies cubic order
CUBIC_GAMMA_THRESHOLD = 3.0 - 2.0 ** (1.0 / 3.0) - 4.0 ** (1.0 / 3.0)

#: the smallest relative tolerance scipy.optimize.bisect accepts
ROOT_RTOL = 4 * EPS


class AverageLipschitzModel:
    """Base class for the rate function ``L`` and its two primitives."""

    kind = "abstract"
    #: relative slack when comparing beta against b
    criterion_rtol = 1e-14

    def rate(self, u: float) -> float:
        raise NotImplementedError

    def primitive(self, t: float) -> float:
        raise NotImplementedError

    def weighted_primitive(self, t: float) -> float:
        raise NotImplementedError

    def constants(self) -> tuple[float, float, float]:
        raise NotImplementedError

    def domain(self) -> tuple[float, bool]:
        """Upper end of the admissible ``t`` range and whether it is included."""
        return self.constants()[2], True

    def closed_form_roots(self, beta: float):
        """Return ``(t*, t**)`` from a closed form, or None if unavailable."""
        return None

    def describe(self) -> str:
        return self.kind


def _positive(value, name):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class ConstantL(AverageLipschitzModel):
    """Classical Lipschitz constant: ``L(u) = L``."""

    L: float
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "L", _positive(self.L, "L"))

    def rate(self, u):
        return self.L

    def primitive(self, t):
        return self.L * t

    def weighted_primitive(self, t):
        return 0.5 * self.L * t * t

    def constants(self):
        return 1.0 / self.L, 0.5 / self.L, 2.0 / self.L

    def closed_form_roots(self, beta):
        disc = max(0.0, 1.0 - 2.0 * self.L * beta)
        root = math.sqrt(disc)
        # 2*beta/(1+root) is the cancellation-free form of (1-root)/L
        return 2.0 * beta / (1.0 + root), (1.0 + root) / self.L

    def describe(self):
        return f"constant(L={self.L!r})"


@dataclass(frozen=True)
class GammaType(AverageLipschitzModel):
    """Smale-type rate ``L(u) = 2 gamma / (1 - gamma u)^3`` on ``[0, 1/gamma)``.

    The matching operator condition is usually quoted with the denominator
    ``1 - gamma ||x - x0|| - ||y - x||``; reducing it to an L-average rate
    suggests ``gamma`` should multiply ``||y - x||`` as well. Only ``h``
    enters the certificate, so that reading is not relied on here.
    """

    gamma: float
    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "gamma", _positive(self.gamma, "gamma"))

    def rate(self, u):
        return 2.0 * self.gamma / (1.0 - self.gamma * u) ** 3

    def primitive(self, t):
        return 1.0 / (1.0 - self.gamma * t) ** 2 - 1.0

    def weighted_primitive(self, t):
        y = self.gamma * t
        return (y / (1.0 - y)) ** 2 / self.gamma

    def constants(self):
        g = self.gamma
        return (1.0 - 1.0 / math.sqrt(2.0)) / g, (3.0 - 2.0 * math.sqrt(2.0)) / g, 0.5 / g

    def domain(self):
        return 1.0 / self.gamma, False

    def closed_form_roots(self, beta):
        alpha = beta * self.gamma
        disc = max(0.0, (1.0 + alpha) ** 2 - 8.0 * alpha)
        s = math.sqrt(disc)
        # roots of 2x^2 - (1+alpha)x + alpha; small one via the product alpha/2
        return 2.0 * alpha / (1.0 + alpha + s) / self.gamma, (1.0 + alpha + s) / (4.0 * self.gamma)

    def describe(self):
        return f"gamma(gamma={self.gamma!r})"


def self_concordant() -> GammaType:
    """Majorant model for self-concordant minimization (gamma = 1)."""
    return GammaType(1.0)


@dataclass(frozen=True, eq=False)
class Custom(AverageLipschitzModel):
    """User supplied rate function.

    ``primitive`` and ``weighted_primitive`` are integrated numerically when
    omitted. ``upper`` bounds the domain of ``L`` (exclusive) when finite.
    """

    L: Callable[[float], float]
    primitive_fn: Optional[Callable[[float], float]] = None
    weighted_primitive_fn: Optional[Callable[[float], float]] = None
    upper: float = math.inf
    name: str = "custom"
    kind = "custom"
    criterion_rtol = 1e-12

    def rate(self, u):
        return float(self.L(u))

    def primitive(self, t):
        if self.primitive_fn is not None:
            return float(self.primitive_fn(t))
        return _quad(self.L, t)

    def weighted_primitive(self, t):
        if self.weighted_primitive_fn is not None:
            return float(self.weighted_primitive_fn(t))
        return _quad(lambda u: self.L(u) * u, t)

    @cached_property
    def _constants(self):
        r0 = _increasing_root(lambda t: self.primitive(t) - 1.0, 0.0, self.upper, "r0")
        b = self.weighted_primitive(r0)
        # h(t) - beta = t*Lambda(t) - W(t) - t is -b at r0 and increasing beyond it
        R = _increasing_root(
            lambda t: t * self.primitive(t) - self.weighted_primitive(t) - t, r0, self.upper, "R"
        )
        return r0, b, R

    def constants(self):
        return self._constants

    def domain(self):
        R = self.constants()[2]
        return R, R < self.upper

    def describe(self):
        return self.name


def _quad(f, t):
    if t == 0:
        return 0.0
    value, _ = scipy.integrate.quad(f, 0.0, t, epsabs=1e-13, epsrel=1e-13, limit=200)
    return value


def _increasing_root(g, lo, upper, what):
    """Root of ``g`` on ``(lo, upper)`` given ``g(lo) < 0`` and ``g`` increasing there."""
    hi = max(2.0 * lo, 1.0)
    for _ in range(200):
        if hi >= upper:
            hi = lo + 0.5 * (upper - lo)
            if hi == lo:
                break
        if g(hi) >= 0:
            return scipy.optimize.bisect(g, lo, hi, xtol=1e-300, rtol=ROOT_RTOL, maxiter=500)
        lo, hi = hi, 2.0 * hi
    raise NoRoot(f"could not bracket {what}: the rate function integrates to less than required")


@dataclass(frozen=True)
class MajorantFunction:
    beta: float
    model: AverageLipschitzModel

    def __post_init__(self):
        object.__setattr__(self, "beta", _positive(self.beta, "beta"))

    def _check(self, t):
        end, closed = self.model.domain()
        if not (t >= 0 and (t < end or (closed and t <= end))):
            bracket = "]" if closed else ")"
            raise DomainExceeded(f"t={t!r} outside [0, {end!r}{bracket}")

    def h(self, t):
        self._check(t)
        m = self.model
        if isinstance(m, ConstantL):
            return self.beta - t + 0.5 * m.L * t * t
        if isinstance(m, GammaType):
            return self.beta - t + m.gamma * t * t / (1.0 - m.gamma * t)
        return self.beta - t + t * m.primitive(t) - m.weighted_primitive(t)

    def dh(self, t):
        self._check(t)
        return -1.0 + self.model.primitive(t)

    def d2h(self, t):
        self._check(t)
        return self.model.rate(t)


def eval_h(m: MajorantFunction, t: float) -> float:
    return m.h(t)


def eval_h_prime(m: MajorantFunction, t: float) -> float:
    return m.dh(t)


def eval_h_double_prime(m: MajorantFunction, t: float) -> float:
    return m.d2h(t)


def model_constants(model: AverageLipschitzModel) -> tuple[float, float, float]:
    """Return ``(r0, b, R)`` for ``model``."""
    return model.constants()


def _at_boundary(beta, b, model):
    return beta >= b * (1.0 - model.criterion_rtol)


def solve_roots(m: MajorantFunction, method: str = "auto") -> tuple[float, float]:
    """Zeros ``(t*, t**)`` of ``h`` in ``[beta, r0]`` and ``[r0, R]``.

    ``method="auto"`` uses closed forms where the model has them;
    ``method="bisection"`` always brackets.
    """
    if method not in ("auto", "bisection"):
        raise ValueError(f"unknown method {method!r}")
    r0, b, R = m.model.constants()
    beta = m.beta
    if beta > b * (1.0 + m.model.criterion_rtol):
        raise CriterionViolated(f"beta={beta!r} exceeds b={b!r}")
    if _at_boundary(beta, b, m.model):
        return r0, r0
    if method == "auto":
        roots = m.model.closed_form_roots(beta)
        if roots is not None:
            return roots
    kw = dict(xtol=1e-300, rtol=ROOT_RTOL, maxiter=500)
    t_star = scipy.optimize.bisect(m.h, beta, r0, **kw)
    t_star2 = scipy.optimize.bisect(m.h, r0, R, **kw)
    return t_star, t_star2


def lipschitz_cubic_coefficient(L: float, beta: float) -> float:
    """Closed-form cubic error coefficient for a constant Lipschitz model."""
    s = math.sqrt(1.0 - 2.0 * L * beta)
    return L * L / (2.0 * (1.0 - 2.0 * L * beta)) * (s + 1.0) / (3.0 * s - 1.0)


def _gamma_parts(alpha):
    s = math.sqrt((1.0 + alpha) ** 2 - 8.0 * alpha)
    return s, s * (3.0 - alpha + s) ** 2, 4.0 * (1.0 + alpha - s)


def gamma_H_star(alpha: float, gamma: float = 1.0) -> float:
    """``h''(t*)/h'(t*)`` for the gamma model in closed form."""
    _, d, _ = _gamma_parts(alpha)
    return -32.0 * gamma / d


def gamma_q(alpha: float) -> float:
    _, d, e = _gamma_parts(alpha)
    return (d + e) / (d - e)


@dataclass(frozen=True)
class ConvergenceCertificate:
    """Everything the majorant says about a two-step Newton run from ``x0``.

    ``H_star``, ``cubic_coefficient`` and ``q`` are None when undefined:
    H* needs ``h'(t*) != 0`` (fails at ``beta == b``), the coefficient needs
    the strict cubic condition, ``q`` exists only for the gamma model.
    """

    beta: float
    model: AverageLipschitzModel
    r0: float
    b: float
    R: float
    t_star: Optional[float]
    t_star2: Optional[float]
    criterion_holds: bool
    cubic_holds: bool
    H_star: Optional[float]
    cubic_coefficient: Optional[float]
    q: Optional[float] = None
    #: 2 + t* H*; zero is the borderline between the strict and
    #: non-strict cubic conditions
    cubic_margin: Optional[float] = field(default=None, compare=False)

    @property
    def majorant(self) -> MajorantFunction:
        return MajorantFunction(self.beta, self.model)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "model": self.model.describe(),
            "r0": self.r0,
            "b": self.b,
            "R": self.R,
            "t_star": self.t_star,
            "t_star2": self.t_star2,
            "criterion_holds": self.criterion_holds,
            "cubic_holds": self.cubic_holds,
            "H_star": self.H_star,
            "cubic_coefficient": self.cubic_coefficient,
            "q": self.q,
        }


def certify(beta: float, model: AverageLipschitzModel, method: str = "auto") -> ConvergenceCertificate:
    """Build the convergence certificate for ``beta = ||F'(x0)^-1 F(x0)||``.

    A violated criterion ``beta > b`` is reported in the certificate, not
    raised.
    """
    m = MajorantFunction(beta, model)
    r0, b, R = model.constants()
    base = dict(beta=m.beta, model=model, r0=r0, b=b, R=R)
    try:
        t_star, t_star2 = solve_roots(m, method)
    except CriterionViolated:
        return ConvergenceCertificate(
            **base, t_star=None, t_star2=None, criterion_holds=False,
            cubic_holds=False, H_star=None, cubic_coefficient=None,
        )

    H_star = margin = coefficient = q = None
    slope = m.dh(t_star)
    if not _at_boundary(m.beta, b, model) and slope < 0:
        H_star = m.d2h(t_star) / slope
        margin = 2.0 + t_star * H_star
    cubic = margin is not None and margin > 0
    if cubic:
        coefficient = 0.5 * H_star**2 * (2.0 - t_star * H_star) / margin
    if isinstance(model, GammaType) and H_star is not None:
        q = gamma_q(m.beta * model.gamma)
    return ConvergenceCertificate(
        **base, t_star=t_star, t_star2=t_star2, criterion_holds=True,
        cubic_holds=cubic, H_star=H_star, cubic_coefficient=coefficient,
        q=q, cubic_margin=margin,
    )


@dataclass(frozen=True)
class MajorizingTrace:
    """Scalar two-step Newton sequence on ``h`` started at ``t0 = 0``.

    ``t`` holds ``t_0 .. t_K`` and ``s`` holds ``s_0 .. s_{K-1}``, so that
    ``t_k < s_k < t_{k+1} < t*`` for every recorded ``k``. Recording stops
    at the tolerance or once round-off breaks that strict chain.
    """

    t: tuple
    s: tuple
    converged: bool

    @property
    def limit(self) -> float:
        return self.t[-1]

    def __len__(self):
        return len(self.s)

    def pairs(self):
        return list(zip(self.t, self.s))


def majorizing_sequence(cert: ConvergenceCertificate, max_k: int = 100, tol: float = 1e-15) -> MajorizingTrace:
    if not cert.criterion_holds:
        raise CriterionViolated("majorizing sequence requires beta <= b")
    m = cert.majorant
    t_star = cert.t_star
    ts, ss = [0.0], []
    for _ in range(max_k):
        t = ts[-1]
        if t_star - t < tol:
            break
        slope = m.dh(t)
        s = t - m.h(t) / slope
        if not t < s < t_star:
            break
        t_next = s - m.h(s) / slope
        if s < t_next and t_star <= t_next <= t_star + 16 * EPS * max(1.0, t_star):
            # t* carries its own ulp-level error; an overshoot of that size
            # means the sequence has reached t* in floating point
            t_next = math.nextafter(t_star, -math.inf)
        if not s < t_next < t_star:
            break
        ss.append(s)
        ts.append(t_next)
    gap = t_star - ts[-1]
    # near a double root (beta == b) round-off stalls the sequence around sqrt(eps)
    converged = gap < tol or (len(ss) < max_k and gap <= 1e-7 * max(1.0, t_star))
    return MajorizingTrace(t=tuple(ts), s=tuple(ss), converged=converged)


def scalar_cubic_bound_check(trace: MajorizingTrace, cert: ConvergenceCertificate, slack: float = 1e-12) -> bool:
    """Check ``t* - t_{k+1} <= H*^2/2 (t* - t_k)^3`` along a trace."""
    if cert.H_star is None:
        raise NotApplicable("H* is undefined (h'(t*) = 0 at beta = b)")
    c = 0.5 * cert.H_star**2
    ts = trace.t
    return all(
        cert.t_star - ts[k + 1] <= c * (cert.t_star - ts[k]) ** 3 + slack
        for k in range(len(ts) - 1)
    )
