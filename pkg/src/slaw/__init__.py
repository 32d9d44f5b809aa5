"""Positive equilibria of ODE systems by iterated power-law approximation.

The package splits a vector field into strictly positive production and
decay parts, replaces both with tangent power laws at the current
point, solves the resulting S-system equilibrium in log space, and
iterates.  Around the solution it reports a local S-system surrogate,
eigenvalue and sign-pattern stability verdicts, basin-of-attraction
maps, and fixed-step trajectory comparisons.
"""

from .errors import (DegenerateError, ExprSyntaxError, ModelError,
                     NoConvergenceError, NonFiniteError,
                     NonPositiveFieldError, SlawError, UnboundNameError)
from .expr import Expr, differentiate, parse, to_source
from .field import SplitField, load_model, parse_model
from .ssystem import (EquilibriumInfo, SignVerdict, SSystem, classify,
                      eigenvalues, equilibrium, jacobian_at_equilibrium,
                      power_vector, sign_semi_stable, ssystem_from_dict,
                      ssystem_to_dict)
from .sapprox import (IterationReport, SApproximation, find_equilibrium,
                      psi_jacobian_fd, psi_step, s_approximate)
from .basin import BasinGrid, GridSpec, sweep
from .odesim import FlowComparison, Trajectory, flow_compare, integrate

__version__ = "0.1.0"

__all__ = [
    "SlawError", "ExprSyntaxError", "UnboundNameError", "NonFiniteError",
    "ModelError", "NonPositiveFieldError", "DegenerateError", "NoConvergenceError",
    "Expr", "parse", "differentiate", "to_source",
    "SplitField", "parse_model", "load_model",
    "SSystem", "EquilibriumInfo", "SignVerdict",
    "power_vector", "equilibrium", "jacobian_at_equilibrium",
    "eigenvalues", "classify", "sign_semi_stable",
    "ssystem_to_dict", "ssystem_from_dict",
    "SApproximation", "IterationReport",
    "s_approximate", "psi_step", "find_equilibrium", "psi_jacobian_fd",
    "GridSpec", "BasinGrid", "sweep",
    "Trajectory", "FlowComparison", "integrate", "flow_compare",
    "__version__",
]
