"""Diagnostics and canonicalization of conservative v = w x grad(H) flows.

The package classifies whether the operator field of a 3D conservative
system satisfies the Jacobi identity, embeds the dynamics in a 4D
divergence-free flow, rescales it to a Hamiltonian one via a conformal
factor, and tabulates the resulting non-Boltzmann equilibria.
"""

from .canonical import (
    BranchViolation,
    CanonicalState,
    ChartSingularity,
    flow_equivalence_gap,
    from_canonical,
    hamilton_rhs,
    hamiltonian_canonical,
    integrate_hamilton,
    to_canonical,
)
from .consys import (
    ConservativeSystem,
    JacobiReport,
    UnknownSystem,
    ZeroFieldError,
    builtin,
    casimir_drift,
    classify_jacobi,
    constraint_residual,
    exb,
    nonintegrable_exb,
    plasma_particle,
    rigid_body,
    velocity,
    velocity_divergence,
)
from .exprlang import (
    DomainError,
    ExprError,
    ExprScalarField,
    ExprSyntaxError,
    ExprVectorField,
    UnknownIdentifier,
    parse,
    to_source,
)
from .extension import (
    ConformalFactorVanished,
    ExtendedState,
    ExtensionSpec,
    NotClosedError,
    conformal_factor,
    default_extension,
    extended_divergence,
    extended_operator,
    extended_velocity,
    jacobi_defect_4d,
    s_of_vparallel,
    vparallel_of_s,
)
from .fieldcore import (
    Box,
    NonFiniteResult,
    Point3,
    PoissonizeError,
    Vec3,
    curl,
    div,
    grad,
    halton_points,
    helicity_density,
)
from .propertime import (
    IntegratorConfig,
    StepFailure,
    TrajectoryRecord,
    integrate,
    jacobian_g,
    volume_preservation_check,
)
from .statmech import (
    Axis,
    EquilibriumGrid,
    EquilibriumSpec,
    NegativeDensity,
    entropy,
    equilibrium_grid,
    f_density,
    gibbs_maximality_check,
    gibbs_weight,
    marginal_density,
)

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "Box",
    "BranchViolation",
    "CanonicalState",
    "ChartSingularity",
    "ConformalFactorVanished",
    "ConservativeSystem",
    "DomainError",
    "EquilibriumGrid",
    "EquilibriumSpec",
    "ExprError",
    "ExprScalarField",
    "ExprSyntaxError",
    "ExprVectorField",
    "ExtendedState",
    "ExtensionSpec",
    "IntegratorConfig",
    "JacobiReport",
    "NegativeDensity",
    "NonFiniteResult",
    "NotClosedError",
    "Point3",
    "PoissonizeError",
    "StepFailure",
    "TrajectoryRecord",
    "UnknownIdentifier",
    "UnknownSystem",
    "Vec3",
    "ZeroFieldError",
    "builtin",
    "casimir_drift",
    "classify_jacobi",
    "conformal_factor",
    "constraint_residual",
    "curl",
    "default_extension",
    "div",
    "entropy",
    "equilibrium_grid",
    "exb",
    "extended_divergence",
    "extended_operator",
    "extended_velocity",
    "f_density",
    "flow_equivalence_gap",
    "from_canonical",
    "gibbs_maximality_check",
    "gibbs_weight",
    "grad",
    "halton_points",
    "hamilton_rhs",
    "hamiltonian_canonical",
    "helicity_density",
    "integrate",
    "integrate_hamilton",
    "jacobi_defect_4d",
    "jacobian_g",
    "marginal_density",
    "nonintegrable_exb",
    "parse",
    "plasma_particle",
    "rigid_body",
    "s_of_vparallel",
    "to_canonical",
    "to_source",
    "velocity",
    "velocity_divergence",
    "volume_preservation_check",
    "vparallel_of_s",
]
