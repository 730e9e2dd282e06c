"""invprox: invariance proximity of function subspaces under the Koopman
(composition) operator of a discrete-time nonlinear system.

The package computes the worst-case relative error of projection-based
finite-dimensional operator models as the sine of the largest principal
angle between a subspace and its operator image, working entirely in Gram
coordinates so that only inner products of dictionary functions are ever
needed. Inner products come from a Gauss-Legendre quadrature backend or
from an empirical snapshot measure.
"""

from .expr import (
    ArityError,
    Composition,
    DynamicsMap,
    Expr,
    ParseError,
    UnknownIdentifier,
    compose_with_map,
    parse,
)
from .geometry import (
    BudgetExceeded,
    DegenerateSpace,
    Isomorphism,
    NotPSD,
    PrincipalDecomposition,
    SubspaceBasis,
    build_isomorphism,
    orthonormalize,
    principal_angles,
    principal_angles_bruteforce,
)
from .koopman import (
    FunctionVec,
    InconsistentSystem,
    InvarianceAnalysis,
    KoopmanModel,
    OracleResult,
    ProximityReport,
    ZeroImage,
    ZeroNorm,
    analyze,
    build_model,
    invariance_proximity,
    proximity_oracle,
    relative_error,
    residuals,
    trajectory_error,
    witness,
)
from .space import (
    Domain,
    EmpiricalSpace,
    GramMatrix,
    NonFiniteValue,
    QuadratureSpace,
    read_snapshots,
    write_snapshots,
)

__version__ = "0.1.0"

__all__ = [
    "parse",
    "compose_with_map",
    "Expr",
    "DynamicsMap",
    "Composition",
    "ParseError",
    "UnknownIdentifier",
    "ArityError",
    "Domain",
    "QuadratureSpace",
    "EmpiricalSpace",
    "GramMatrix",
    "NonFiniteValue",
    "read_snapshots",
    "write_snapshots",
    "orthonormalize",
    "build_isomorphism",
    "principal_angles",
    "principal_angles_bruteforce",
    "SubspaceBasis",
    "Isomorphism",
    "PrincipalDecomposition",
    "DegenerateSpace",
    "NotPSD",
    "BudgetExceeded",
    "FunctionVec",
    "KoopmanModel",
    "ProximityReport",
    "OracleResult",
    "InvarianceAnalysis",
    "analyze",
    "build_model",
    "invariance_proximity",
    "witness",
    "relative_error",
    "proximity_oracle",
    "residuals",
    "trajectory_error",
    "InconsistentSystem",
    "ZeroImage",
    "ZeroNorm",
    "__version__",
]
