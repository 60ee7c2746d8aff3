"""Six-compartment plankton quadratic stochastic operator.

Compartments are phytoplankton, zooplankton, mixoplankton, bacteria,
dissolved organic matter and dissolved inorganic matter
(``x1..x6``); twelve transfer rates ``a1..a12`` define the operator V on
the five-dimensional simplex.
"""

from .core import (
    RATE_NAMES,
    SPECIES,
    Constraint,
    Parameters,
    ValidityReport,
    apply_tensor,
    apply_v,
    as_simplex_point,
    build_tensor,
    check_l_volterra,
    check_simplex_criterion,
    check_tensor,
    evolution_map,
    validate_parameters,
    vertex,
)
from .dynamics import (
    ConvergenceVerdict,
    PredictedLimit,
    ReducedBacteriaMap,
    Scenario,
    StopReason,
    Trajectory,
    iterate,
    orbit,
    reduced_bacteria_map,
    scenario,
)
from .errors import (
    DegenerateEquationError,
    EigenvalueError,
    HypothesisError,
    InvalidParametersError,
    ModelInconsistencyError,
    NotAFixedPointError,
    PlanktonQSOError,
    SamplingError,
    SimplexError,
    TensorError,
)
from .fixed_points import (
    Family,
    FixedPoint,
    QuadraticCoefficients,
    enumerate_fixed_points,
    is_on_lambda1_segment,
    nearest_fixed_point,
    solve_quadratic,
)
from .harness import ExperimentReport, ExperimentSpec, Target, run_experiment, sample_parameters
from .stability import Classification, StabilityReport, classify, eigenvalues, jacobian, lambda2_spectrum, vertex_audit

__version__ = "0.1.0"
