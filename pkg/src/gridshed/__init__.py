"""Optimal power shutoff toolkit.

Exact second-order-cone shutoff formulations, their linear relaxations, a
deterministic branch-and-bound with lazy cone cuts, and redispatch-based
solution-quality evaluation.
"""

from .experiment import ExperimentPlan, run_matrix, sweep_linearization
from .formulation import (
    FormulationKind,
    VariableMap,
    build_dc_ops,
    build_formulation,
    build_redispatch,
    derive_bounds,
)
from .instance import ConeSide, ConicMipInstance, RotatedCone, SolveResult
from .matpower import bundled_case_path, parse_case
from .network import (
    Network,
    RiskScenario,
    generate_risk_scenario,
    sanitize_negative_loads,
)
from .redispatch import RedispatchReport, bound_ratio
from .redispatch import evaluate as evaluate_redispatch
from .solver import (
    BnbConfig,
    LinearNodeSolver,
    OuterApproximationSolver,
    ScipyLinProgBackend,
    fix_and_resolve,
    outer_approximation_loop,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "BnbConfig",
    "ConeSide",
    "ConicMipInstance",
    "ExperimentPlan",
    "FormulationKind",
    "LinearNodeSolver",
    "Network",
    "OuterApproximationSolver",
    "RedispatchReport",
    "RiskScenario",
    "RotatedCone",
    "ScipyLinProgBackend",
    "SolveResult",
    "VariableMap",
    "bound_ratio",
    "build_dc_ops",
    "build_formulation",
    "build_redispatch",
    "bundled_case_path",
    "derive_bounds",
    "evaluate_redispatch",
    "fix_and_resolve",
    "generate_risk_scenario",
    "outer_approximation_loop",
    "parse_case",
    "run_matrix",
    "sanitize_negative_loads",
    "solve",
    "sweep_linearization",
    "__version__",
]
