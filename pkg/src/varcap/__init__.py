"""Variational p-capacities on weighted metric measure graphs.

The package computes condenser capacities (pinned p-energy minima), the
measure-weighted Sobolev capacity, and the relatively-open-infimum variant
on finite weighted graphs, together with the discrete topology helpers,
closed-form oracles, and property suites used to validate them.
"""

from .capacity import (
    CapacityResult,
    OuterProfile,
    ambient_comparison,
    boundary_capacity_check,
    default_tilde_family,
    outer_capacity_profile,
    path_capacity_oracle,
    radial_condenser_oracle,
    sobolev_capacity,
    sphere_surface_area,
    tilde_capacity,
    variational_capacity,
)
from .kernels import BACKEND
from .newtonian import (
    DiscreteFunction,
    EdgeFunction,
    lattice_max,
    lattice_min,
    min_upper_gradient,
    p_energy,
    pointwise_dilation,
    sample_paths,
    sobolev_norm_p,
    truncate,
    verify_upper_gradient,
)
from .properties import (
    CheckRecord,
    ExperimentSpec,
    PropertyReport,
    check_capacity_axioms,
    convergence_study,
    example_spec,
    run_paper_example,
)
from .solver import (
    SolveDiagnostics,
    SolverConfig,
    minimize_p_energy,
    poincare_constant,
)
from .space import (
    Ball,
    Box,
    Halfspace,
    ListSet,
    MetricMeasureGraph,
    NodeSet,
    SetFamily,
    SetOp,
    all_nodes,
    boundary,
    build_graph,
    build_grid,
    closure,
    combine_openness,
    dilate,
    empty_set,
    interior,
    is_combinatorially_open,
    is_relatively_open,
    load_space,
    parse_predicate,
    resolve_set,
    restrict_ambient,
    save_space,
    space_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Ball",
    "Box",
    "CapacityResult",
    "CheckRecord",
    "DiscreteFunction",
    "EdgeFunction",
    "ExperimentSpec",
    "Halfspace",
    "ListSet",
    "MetricMeasureGraph",
    "NodeSet",
    "OuterProfile",
    "PropertyReport",
    "SetFamily",
    "SetOp",
    "SolveDiagnostics",
    "SolverConfig",
    "all_nodes",
    "ambient_comparison",
    "boundary",
    "boundary_capacity_check",
    "build_graph",
    "build_grid",
    "check_capacity_axioms",
    "closure",
    "combine_openness",
    "convergence_study",
    "default_tilde_family",
    "dilate",
    "empty_set",
    "example_spec",
    "interior",
    "is_combinatorially_open",
    "is_relatively_open",
    "lattice_max",
    "lattice_min",
    "load_space",
    "min_upper_gradient",
    "minimize_p_energy",
    "outer_capacity_profile",
    "p_energy",
    "parse_predicate",
    "path_capacity_oracle",
    "pointwise_dilation",
    "poincare_constant",
    "radial_condenser_oracle",
    "resolve_set",
    "restrict_ambient",
    "run_paper_example",
    "sample_paths",
    "save_space",
    "sobolev_capacity",
    "sobolev_norm_p",
    "space_from_dict",
    "sphere_surface_area",
    "tilde_capacity",
    "truncate",
    "variational_capacity",
    "verify_upper_gradient",
]
