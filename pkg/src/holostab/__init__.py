"""holostab: holonomic gates and their stability under control errors.

The library computes path-ordered exponentials of matrix-valued connections
over a space of control parameters, the fidelity of the resulting gates when
the control loop is perturbed, and the curvature quantities that govern how
fast that fidelity degrades.
"""

from .connection import (
    AdiabaticConnection,
    ConnectionField,
    ConstantConnection,
    CurvatureValue,
    FourierConnection,
    GapReport,
    HamiltonianFamily,
    LinearConnection,
    PureGaugeConnection,
    adiabatic_connection_at,
    conjugated,
    curvature,
    curvature_tensor,
    degeneracy_check,
    eval_connection,
)
from .errors import (
    CompositionError,
    ConvergenceError,
    DegeneracyLostError,
    DimensionError,
    GaugeAlignmentError,
    HolostabError,
    InvalidInputError,
    SelfCheckError,
    UnsupportedSurfaceError,
)
from .fidelity import (
    FidelityValue,
    LinearTermReport,
    RateReport,
    RobustnessReport,
    ScalingReport,
    TaylorTerms,
    fidelity_exact,
    fidelity_rate,
    fidelity_taylor,
    linear_term,
    parallelogram_fidelity,
    robustness_scan,
    scaling_experiment,
)
from .geometry import (
    Loop,
    ParallelogramErrorModel,
    Path,
    SmoothErrorModel,
    SurfaceMesh,
    circle_loop,
    compose,
    error_loop,
    invert,
    parallelogram_loop,
    perturb_loop,
    regime_check,
    signed_areas,
    span_surface,
    square_loop,
)
from .holonomy import (
    DEFAULT_CONFIG,
    IntegratorConfig,
    convergence_study,
    holonomy,
    stokes_residual,
    surface_ordered_holonomy,
    transporter,
)
from .linalg import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    anticommutator,
    commutator,
    density_matrix,
    frobenius_distance,
    matrix_exponential,
    maximally_mixed,
    operator_norm,
    pure_state,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
