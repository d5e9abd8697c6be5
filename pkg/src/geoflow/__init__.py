"""Geometric GKLS dynamics in coherence-vector coordinates."""
from ._kernels import BACKEND
from .algebra import (
    HermitianBasis,
    KrausSet,
    StructureConstants,
    build_gellmann_basis,
    choi_matrix,
    is_completely_positive,
    jordan_product,
    lie_product,
    structure_constants,
    verify_lie_jordan,
)
from .fields import (
    GKLSModel,
    PolyField,
    affinity_report,
    bracket,
    evaluate,
    gkls_decomposition,
    gkls_field,
    gradient_field,
    hamiltonian_field,
    kraus_field,
    sl_action,
)
from .flow import (
    IntegratorConfig,
    Trajectory,
    exact_affine_flow,
    integrate,
    lindblad_matrix_oracle,
    oracle_consistency,
    verify_semigroup,
    xy_flow,
)
from .stability import (
    SemigroupFamily,
    commutant_dimension,
    fixed_points,
    lasalle_certify,
    purity_lie_derivative,
    s_infinity_probe,
)
from .statespace import CoherencePoint, diagnostics, from_matrix, sample_state, to_matrix

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CoherencePoint", "GKLSModel", "HermitianBasis", "IntegratorConfig", "KrausSet",
    "PolyField", "SemigroupFamily", "StructureConstants", "Trajectory", "affinity_report", "bracket",
    "build_gellmann_basis", "choi_matrix", "commutant_dimension", "diagnostics", "evaluate",
    "exact_affine_flow", "fixed_points", "from_matrix", "gkls_decomposition", "gkls_field",
    "gradient_field", "hamiltonian_field", "integrate", "is_completely_positive", "jordan_product",
    "kraus_field", "lasalle_certify", "lie_product", "lindblad_matrix_oracle", "oracle_consistency",
    "purity_lie_derivative", "s_infinity_probe", "sample_state", "sl_action", "structure_constants",
    "to_matrix", "verify_lie_jordan", "verify_semigroup", "xy_flow",
]
