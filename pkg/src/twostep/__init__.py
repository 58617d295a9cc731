"""Two-step Newton method with majorant-based semilocal convergence certificates."""

from .exceptions import (
    CriterionViolated,
    DimensionMismatch,
    DomainExceeded,
    InsufficientData,
    InvalidSize,
    MaxIterations,
    NoRoot,
    NotApplicable,
    SingularJacobian,
    SingularMatrix,
    SingularSchur,
    TwoStepError,
)
from .majorant import ConstantL, ConvergenceCertificate, Custom, GammaType, certify, self_concordant
from .quadrature import composite_gl4
from .riccati import TransportParameters, solve_minimal
from .solver import ProblemDefinition, SolveOptions, check_majorization, estimate_order, two_step_newton

__version__ = "0.1.0"
