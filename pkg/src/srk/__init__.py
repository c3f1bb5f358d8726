"""Two-stage stochastic Runge-Kutta schemes for strong approximation of SDEs."""

from ._kernels import BACKEND
from .bench import StudyConfig, cost, effective_order, empirical_order, emit_report, run_study
from .sde import SdeProblem, check_commutativity, fd_jacobian, strat_drift_correction
from .solver import SCHEME_NAMES, get_scheme, integrate
from .tableau import ExtendedTableau, builtin, check_order_conditions, parse_tableau, serialize_tableau
from .testeqs import eq1, eq2, eq3, eq4, eq5, eq6, matrix_exp
from .wiener import rho

__all__ = [
    "BACKEND", "StudyConfig", "cost", "effective_order", "empirical_order", "emit_report",
    "run_study", "SdeProblem", "check_commutativity", "fd_jacobian", "strat_drift_correction",
    "SCHEME_NAMES", "get_scheme", "integrate", "ExtendedTableau", "builtin",
    "check_order_conditions", "parse_tableau", "serialize_tableau", "eq1", "eq2", "eq3", "eq4",
    "eq5", "eq6", "matrix_exp", "rho",
]
