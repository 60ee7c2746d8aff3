"""Exception types raised by the plankton operator library."""


class PlanktonQSOError(Exception):
    """Base class for all library errors."""


class InvalidParametersError(PlanktonQSOError, ValueError):
    """Rates are non-finite, non-positive, or violate the simplex-invariance conditions."""


class SimplexError(PlanktonQSOError, ValueError):
    """A point is not on the five-dimensional standard simplex."""


class TensorError(PlanktonQSOError, ValueError):
    """A cubic matrix is not symmetric or not stochastic."""


class DegenerateEquationError(PlanktonQSOError, ValueError):
    """All coefficients of a quadratic vanish."""


class EigenvalueError(PlanktonQSOError, RuntimeError):
    """The eigenvalue solver did not converge."""


class NotAFixedPointError(PlanktonQSOError, ValueError):
    """Stability analysis was requested at a point that does not satisfy V(x) = x."""


class ModelInconsistencyError(PlanktonQSOError, RuntimeError):
    """A property that holds for every valid rate set failed numerically."""


class HypothesisError(PlanktonQSOError, ValueError):
    """Inputs do not satisfy the hypotheses of the requested scenario."""


class SamplingError(PlanktonQSOError, RuntimeError):
    """Rejection sampling exhausted its budget without meeting the constraints."""
