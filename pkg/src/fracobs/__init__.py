"""Time-fractional diffusion on an interval: simulation, constrained regional
observability, and reconstruction of the initial state by the Hilbert
Uniqueness Method."""

import os as _os

# FRACOBS_THREADS caps the BLAS/OpenMP pools; it must be applied before numpy loads.
_threads = _os.environ.get("FRACOBS_THREADS", "")
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ[_var] = _threads

from .errors import (  # noqa: E402
    AccuracyError,
    ConvergenceError,
    ConventionError,
    DomainError,
    EigenFailure,
    FracObsError,
    GridMismatchError,
    MaxIterError,
    NotObservableError,
    PoleError,
)
from .special_functions import (  # noqa: E402
    FracOrder,
    MLFResult,
    gamma,
    mainardi_density,
    mittag_leffler,
    mittag_leffler_two,
    ml_array,
    xi_density,
    xi_moment,
)
from .frac_calc import (  # noqa: E402
    TimeGrid,
    TimeSeries,
    caputo_left,
    caputo_right,
    reflect,
    rl_integral_left,
    rl_integral_right,
)
from .quadrature import TimeQuadrature  # noqa: E402
from .spectral_model import (  # noqa: E402
    SpaceGrid,
    SpectralBasis,
    SpectralState,
    adjoint_propagate,
    evaluate,
    project,
    propagate,
    residual_check,
)
from .sensing import (  # noqa: E402
    MeasurementTrace,
    OmegaGrid,
    SensorSpec,
    Subregion,
    admissibility_constant,
    extend,
    observe,
    restrict,
    sensor_weights,
)
from .enlarged_observability import (  # noqa: E402
    ConstraintPair,
    ObservabilityReport,
    decide_e_observability,
    membership,
    observability_gramian,
    regional_output,
    regional_state,
    strategic_sensor,
)
from .hum_reconstruct import (  # noqa: E402
    ReconstructionProblem,
    ReconstructionReport,
    SolverSettings,
    apply_N,
    assemble_rhs,
    backward_theta_state,
    seminorm_G,
    solve,
)

__version__ = "0.1.0"
