"""Equivariant interaction dynamics for N-agent systems on homogeneous spaces."""

from .checks import CheckReport, Verdict, run_checks
from .errors import ConfigError, DegeneracyError, DomainViolation, EquidynError, ExprEvalError, ExprSyntaxError
from .expr import ParamExpr, evaluate, parse
from .families import (DynamicsFamily, arclength, circle_family, counterexample_mu_field,
                       gradient_flow_se2, quantum_family, rel_line_family, rel_plane_family,
                       rel_unicycle_family, se2_family, se2_pepd_family, sl2_family,
                       sphere_so2_family, sphere_so3_family, unicycle_family)
from .integrate import IntegratorConfig, Trajectory, integrate, quotient_observable
from .invariants import frame, radiality_residual
from .lie import Configuration, GroupElement, Scenario, act, get_chart
from .quantum import quantum_invariants, takagi

__version__ = "0.1.0"

__all__ = [
    "CheckReport", "ConfigError", "Configuration", "DegeneracyError", "DomainViolation",
    "DynamicsFamily", "EquidynError", "ExprEvalError", "ExprSyntaxError", "GroupElement",
    "IntegratorConfig", "ParamExpr", "Scenario", "Trajectory", "Verdict", "act", "arclength",
    "circle_family", "counterexample_mu_field", "evaluate", "frame", "get_chart",
    "gradient_flow_se2", "integrate", "parse", "quantum_family", "quantum_invariants",
    "quotient_observable", "radiality_residual", "rel_line_family", "rel_plane_family",
    "rel_unicycle_family", "run_checks", "se2_family", "se2_pepd_family", "sl2_family",
    "sphere_so2_family", "sphere_so3_family", "takagi", "unicycle_family",
]
