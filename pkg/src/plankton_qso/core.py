"""Model rates, simplex points, the evolution operator and its cubic-matrix form.

Coordinates are ordered ``(P, Z, M, B, O, I)``: phytoplankton, zooplankton,
mixoplankton, bacteria, dissolved organic matter and dissolved inorganic
matter.  Points are plain ``numpy`` arrays of shape ``(6,)``; the cubic
stochastic matrix is a ``(6, 6, 6)`` array indexed ``p[i, j, k]`` with
0-based indices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np
from numba import njit

from .errors import InvalidParametersError, SimplexError, TensorError

logger = logging.getLogger(__name__)

N_SPECIES = 6
SPECIES = ("P", "Z", "M", "B", "O", "I")
RATE_NAMES = tuple(f"a{i}" for i in range(1, 13))

TOL_SUM = 1e-12
TOL_NONNEG = 1e-12
# Renormalise when the coordinate sum drifts past this; kept below TOL_SUM so
# stored iterates always satisfy the simplex tolerance.
RENORM_TOL = 1e-13
# Coordinates outside [-DIVERGENCE_TOL, 1 + DIVERGENCE_TOL] mean the run left the simplex.
DIVERGENCE_TOL = 1e-9

# Status codes returned by the step kernel.
STEP_OK = 0
STEP_CLAMPED = 1
STEP_RENORMALIZED = 2
STEP_NEGATIVE = 3
STEP_DIVERGED = 4


@dataclass(frozen=True)
class Parameters:
    """The twelve transfer rates ``a1..a12`` of the trophic network.

    ``a1`` I->P, ``a2`` P->Z, ``a3`` P->M, ``a4`` P->O, ``a5`` Z->O, ``a6`` Z->I,
    ``a7`` I->M, ``a8`` M->I, ``a9`` M->O, ``a10`` O->B, ``a11`` I->B, ``a12`` B->I.
    """

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a7: float
    a8: float
    a9: float
    a10: float
    a11: float
    a12: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))

    @classmethod
    def uniform(cls, value: float, **overrides: float) -> "Parameters":
        """All rates equal to ``value`` except the named overrides."""
        values = {name: value for name in RATE_NAMES}
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "Parameters":
        values = [float(v) for v in values]
        if len(values) != 12:
            raise InvalidParametersError(f"expected 12 rates, got {len(values)}")
        return cls(*values)

    @classmethod
    def from_mapping(cls, doc: Mapping[str, object]) -> "Parameters":
        """Parse a flat ``{"a1": ..., "a12": ...}`` document (numbers or decimal strings)."""
        missing = [name for name in RATE_NAMES if name not in doc]
        if missing:
            raise KeyError(f"missing rate(s): {', '.join(missing)}")
        values = {}
        for name in RATE_NAMES:
            raw = doc[name]
            if isinstance(raw, bool):
                raise InvalidParametersError(f"{name}: expected a number, got {raw!r}")
            try:
                values[name] = float(raw)
            except (TypeError, ValueError):
                raise InvalidParametersError(f"{name}: cannot parse {raw!r} as a number") from None
        return cls(**values)

    def to_mapping(self) -> dict[str, str]:
        """Flat document with full-precision decimal strings."""
        return {name: repr(getattr(self, name)) for name in RATE_NAMES}

    def replace(self, **changes: float) -> "Parameters":
        values = {name: getattr(self, name) for name in RATE_NAMES}
        values.update(changes)
        return Parameters(**values)

    @cached_property
    def array(self) -> np.ndarray:
        out = np.array([getattr(self, name) for name in RATE_NAMES], dtype=np.float64)
        out.setflags(write=False)
        return out

    @cached_property
    def report(self) -> "ValidityReport":
        return validate_parameters(self)

    @property
    def valid(self) -> bool:
        return self.report.valid


@dataclass(frozen=True)
class Constraint:
    """A named inequality on the rates.

    ``slack`` maps anything exposing attributes ``a1..a12`` (a
    :class:`Parameters` or a batch of rate columns) to a value that is
    ``>= 0`` exactly when the inequality holds.  Strict inequalities need
    ``slack > 0``; samplers may demand an extra margin on those.
    """

    name: str
    slack: Callable[[object], object]
    strict: bool = False

    def holds(self, rates, margin: float = 0.0):
        s = self.slack(rates)
        if self.strict:
            return s > margin
        return s >= 0.0


# Conditions under which V maps the simplex into itself.
SIMPLEX_CONDITIONS: tuple[Constraint, ...] = (
    Constraint("a1≤1", lambda r: 1.0 - r.a1),
    Constraint("a6≤1", lambda r: 1.0 - r.a6),
    Constraint("a10≤1", lambda r: 1.0 - r.a10),
    Constraint("a12≤1", lambda r: 1.0 - r.a12),
    Constraint("a2+a4≤1", lambda r: 1.0 - (r.a2 + r.a4)),
    Constraint("a3+a4≤1", lambda r: 1.0 - (r.a3 + r.a4)),
    Constraint("a5+a6≤1", lambda r: 1.0 - (r.a5 + r.a6)),
    Constraint("a8+a9≤1", lambda r: 1.0 - (r.a8 + r.a9)),
    Constraint("|a7−a8|≤1", lambda r: 1.0 - abs(r.a7 - r.a8)),
    Constraint("|a11−a12|≤1", lambda r: 1.0 - abs(r.a11 - r.a12)),
)

POSITIVITY_CONDITIONS: tuple[Constraint, ...] = tuple(
    Constraint(f"{name}>0", (lambda r, _n=name: getattr(r, _n)), strict=True) for name in RATE_NAMES
)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"valid": self.valid, "violations": list(self.violations)}


def validate_parameters(params: Parameters) -> ValidityReport:
    """Check strict positivity of every rate and the simplex-invariance conditions.

    Non-strict inequalities are evaluated exactly, with no tolerance.
    """
    bad = [name for name in RATE_NAMES if not math.isfinite(getattr(params, name))]
    if bad:
        raise InvalidParametersError(f"non-finite rate(s): {', '.join(bad)}")
    violations = [c.name for c in POSITIVITY_CONDITIONS if not c.holds(params)]
    violations += [c.name for c in SIMPLEX_CONDITIONS if not c.holds(params)]
    return ValidityReport(valid=not violations, violations=tuple(violations))


def require_valid(params: Parameters) -> Parameters:
    report = params.report
    if not report.valid:
        raise InvalidParametersError("invalid rates: violates " + ", ".join(report.violations))
    return params


def as_simplex_point(x, tol_sum: float = TOL_SUM, tol_nonneg: float = TOL_NONNEG) -> np.ndarray:
    """Return ``x`` as a float array after checking it lies on S^5."""
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if arr.shape != (N_SPECIES,):
        raise SimplexError(f"expected {N_SPECIES} coordinates, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise SimplexError(f"non-finite coordinate in {arr.tolist()}")
    if arr.min() < -tol_nonneg:
        raise SimplexError(f"negative coordinate {arr.min():.3e} in {arr.tolist()}")
    total = math.fsum(arr)
    if abs(total - 1.0) > tol_sum:
        raise SimplexError(f"coordinates sum to {total!r}, not 1")
    return arr


def vertex(i: int) -> np.ndarray:
    """Vertex ``e_i`` of the simplex (1-based, as in ``e1``..``e6``)."""
    if not 1 <= i <= N_SPECIES:
        raise ValueError(f"vertex index must lie in 1..{N_SPECIES}, got {i}")
    e = np.zeros(N_SPECIES)
    e[i - 1] = 1.0
    return e


# ---------------------------------------------------------------------------
# evolution operator kernels


@njit(cache=True)
def _v_raw(a, x, out):
    x1, x2, x3, x4, x5, x6 = x[0], x[1], x[2], x[3], x[4], x[5]
    out[0] = x1 * (1.0 - a[3] + a[0] * x6 - a[1] * x2 - a[2] * x3)
    out[1] = x2 * (1.0 - a[4] - a[5] + a[1] * x1)
    out[2] = x3 * (1.0 - a[7] - a[8] + a[2] * x1 + a[6] * x6)
    out[3] = x4 * (1.0 - a[11] + a[9] * x5 + a[10] * x6)
    out[4] = x5 + a[3] * x1 + a[4] * x2 + a[8] * x3 - a[9] * x4 * x5
    out[5] = x6 * (1.0 - a[0] * x1 - a[6] * x3 - a[10] * x4) + a[5] * x2 + a[7] * x3 + a[11] * x4


@njit(cache=True)
def _v_step(a, x, out):
    """One application of V with round-off handling; returns a STEP_* code."""
    _v_raw(a, x, out)
    for i in range(6):
        v = out[i]
        if not (v >= -DIVERGENCE_TOL and v <= 1.0 + DIVERGENCE_TOL):
            return STEP_DIVERGED
    for i in range(6):
        if out[i] < -TOL_NONNEG:
            return STEP_NEGATIVE
    status = STEP_OK
    for i in range(6):
        if out[i] < 0.0:
            out[i] = 0.0
            status = STEP_CLAMPED
    s = 0.0
    for i in range(6):
        s += out[i]
    if status == STEP_CLAMPED or abs(s - 1.0) > RENORM_TOL:
        if status == STEP_OK:
            status = STEP_RENORMALIZED
        for i in range(6):
            out[i] /= s
    return status


@njit(cache=True)
def _v_raw_batch(a, xs, out):
    for r in range(xs.shape[0]):
        _v_raw(a, xs[r], out[r])


def evolution_map(params: Parameters, x) -> np.ndarray:
    """Evaluate the six polynomial equations of V at any point of R^6.

    No simplex checks and no round-off handling; used for derivatives and
    residuals of candidate points.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        out = np.empty_like(x)
        _v_raw_batch(params.array, np.ascontiguousarray(x), out)
        return out
    out = np.empty(N_SPECIES)
    _v_raw(params.array, np.ascontiguousarray(x), out)
    return out


def apply_v(params: Parameters, x) -> np.ndarray:
    """Image of a simplex point under the evolution operator V.

    Negative round-off above ``-TOL_NONNEG`` is clamped to zero and the
    point renormalised; anything more negative raises :class:`SimplexError`,
    since valid rates cannot produce it.
    """
    require_valid(params)
    x = as_simplex_point(x)
    out = np.empty(N_SPECIES)
    status = _v_step(params.array, x, out)
    if status >= STEP_NEGATIVE:
        _v_raw(params.array, x, out)
        raise SimplexError(
            f"V left the simplex: image {out.tolist()} of {x.tolist()} "
            "(rates should have been rejected by validation)"
        )
    if status == STEP_CLAMPED:
        logger.debug("clamped negative round-off in V(%s)", x.tolist())
    elif status == STEP_RENORMALIZED:
        logger.debug("renormalised coordinate-sum drift in V(%s)", x.tolist())
    return out


# ---------------------------------------------------------------------------
# cubic stochastic matrix

# (i, j, k, doubled, value) with 1-based indices.  ``doubled`` rows are the
# symmetric-pair totals 2 P_{ij,k}; each half is stored at (i,j,k) and (j,i,k).
_TABLE: tuple[tuple[int, int, int, bool, Callable[[Parameters], float]], ...] = (
    (1, 1, 1, False, lambda a: 1 - a.a4),
    (1, 2, 1, True, lambda a: 1 - a.a2 - a.a4),
    (1, 3, 1, True, lambda a: 1 - a.a3 - a.a4),
    (1, 4, 1, True, lambda a: 1 - a.a4),
    (1, 5, 1, True, lambda a: 1 - a.a4),
    (1, 6, 1, True, lambda a: 1 + a.a1 - a.a4),
    (1, 2, 2, True, lambda a: 1 + a.a2 - a.a5 - a.a6),
    (2, 2, 2, False, lambda a: 1 - a.a5 - a.a6),
    (2, 3, 2, True, lambda a: 1 - a.a5 - a.a6),
    (2, 4, 2, True, lambda a: 1 - a.a5 - a.a6),
    (2, 5, 2, True, lambda a: 1 - a.a5 - a.a6),
    (2, 6, 2, True, lambda a: 1 - a.a5 - a.a6),
    (1, 3, 3, True, lambda a: 1 + a.a3 - a.a8 - a.a9),
    (2, 3, 3, True, lambda a: 1 - a.a8 - a.a9),
    (3, 3, 3, False, lambda a: 1 - a.a8 - a.a9),
    (3, 4, 3, True, lambda a: 1 - a.a8 - a.a9),
    (3, 5, 3, True, lambda a: 1 - a.a8 - a.a9),
    (3, 6, 3, True, lambda a: 1 + a.a7 - a.a8 - a.a9),
    (1, 4, 4, True, lambda a: 1 - a.a12),
    (2, 4, 4, True, lambda a: 1 - a.a12),
    (3, 4, 4, True, lambda a: 1 - a.a12),
    (4, 4, 4, False, lambda a: 1 - a.a12),
    (4, 5, 4, True, lambda a: 1 + a.a10 - a.a12),
    (4, 6, 4, True, lambda a: 1 + a.a11 - a.a12),
    (1, 1, 5, False, lambda a: a.a4),
    (1, 2, 5, True, lambda a: a.a4 + a.a5),
    (1, 3, 5, True, lambda a: a.a4 + a.a9),
    (1, 4, 5, True, lambda a: a.a4),
    (1, 5, 5, True, lambda a: 1 + a.a4),
    (1, 6, 5, True, lambda a: a.a4),
    (2, 2, 5, False, lambda a: a.a5),
    (2, 3, 5, True, lambda a: a.a5 + a.a9),
    (2, 4, 5, True, lambda a: a.a5),
    (2, 5, 5, True, lambda a: 1 + a.a5),
    (2, 6, 5, True, lambda a: a.a5),
    (3, 3, 5, False, lambda a: a.a9),
    (3, 4, 5, True, lambda a: a.a9),
    (3, 5, 5, True, lambda a: 1 + a.a9),
    (3, 6, 5, True, lambda a: a.a9),
    (4, 5, 5, True, lambda a: 1 - a.a10),
    (5, 5, 5, False, lambda a: 1.0),
    (5, 6, 5, True, lambda a: 1.0),
    (1, 2, 6, True, lambda a: a.a6),
    (1, 3, 6, True, lambda a: a.a8),
    (1, 4, 6, True, lambda a: a.a12),
    (1, 6, 6, True, lambda a: 1 - a.a1),
    (2, 2, 6, False, lambda a: a.a6),
    (2, 3, 6, True, lambda a: a.a6 + a.a8),
    (2, 4, 6, True, lambda a: a.a6 + a.a12),
    (2, 5, 6, True, lambda a: a.a6),
    (2, 6, 6, True, lambda a: 1 + a.a6),
    (3, 3, 6, False, lambda a: a.a8),
    (3, 4, 6, True, lambda a: a.a8 + a.a12),
    (3, 5, 6, True, lambda a: a.a8),
    (3, 6, 6, True, lambda a: 1 - a.a7 + a.a8),
    (4, 4, 6, False, lambda a: a.a12),
    (4, 5, 6, True, lambda a: a.a12),
    (4, 6, 6, True, lambda a: 1 - a.a11 + a.a12),
    (5, 6, 6, True, lambda a: 1.0),
    (6, 6, 6, False, lambda a: 1.0),
)


def build_tensor(params: Parameters) -> np.ndarray:
    """Cubic stochastic matrix ``p[i, j, k]`` equivalent to V on the simplex."""
    require_valid(params)
    p = np.zeros((N_SPECIES,) * 3)
    for i, j, k, doubled, value in _TABLE:
        v = float(value(params))
        if doubled:
            p[i - 1, j - 1, k - 1] = p[j - 1, i - 1, k - 1] = v / 2.0
        else:
            p[i - 1, i - 1, k - 1] = v
    return p


def check_tensor(t, tol: float = 1e-14) -> np.ndarray:
    """Validate the cubic-matrix invariants; returns ``t`` as an array.

    Entries must lie in [0, 1], satisfy ``p[i,j,k] == p[j,i,k]`` exactly and
    each row ``p[i,j,:]`` must sum to one within ``tol``.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise TensorError(f"expected an n×n×n array, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise TensorError("non-finite tensor entry")
    if t.min() < 0.0 or t.max() > 1.0:
        raise TensorError(f"entries outside [0, 1]: min {t.min()!r}, max {t.max()!r}")
    if not np.array_equal(t, t.transpose(1, 0, 2)):
        raise TensorError("tensor is not symmetric in its first two indices")
    sums = t.sum(axis=2)
    worst = np.abs(sums - 1.0).max()
    if worst > tol:
        raise TensorError(f"row sums deviate from 1 by up to {worst:.3e}")
    return t


def apply_tensor(t, x) -> np.ndarray:
    """Quadratic form ``x'_k = sum_ij p[i,j,k] x_i x_j``."""
    t = check_tensor(t)
    if t.shape[0] != N_SPECIES:
        raise TensorError(f"expected a {N_SPECIES}×{N_SPECIES}×{N_SPECIES} tensor")
    x = as_simplex_point(x)
    out = np.einsum("ijk,i,j->k", t, x, x)
    return as_simplex_point(out)


def check_simplex_criterion(gamma, tol: float = 0.0, row_tol: float = 1e-12) -> bool:
    """Criterion for a real (not necessarily nonnegative) quadratic operator to map the simplex into itself.

    Needs unit row sums (raises :class:`TensorError` otherwise); returns
    whether ``0 <= g[i,i,k] <= 1`` and
    ``-sqrt(g[i,i,k] g[j,j,k]) <= g[i,j,k] <= 1 + sqrt((1-g[i,i,k])(1-g[j,j,k]))``
    for all ``i, j, k``.  Works for any dimension.
    """
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim != 3 or len(set(g.shape)) != 1:
        raise TensorError(f"expected an n×n×n array, got shape {g.shape}")
    if not np.array_equal(g, g.transpose(1, 0, 2)):
        raise TensorError("tensor is not symmetric in its first two indices")
    worst = np.abs(g.sum(axis=2) - 1.0).max()
    if worst > row_tol:
        raise TensorError(f"row sums deviate from 1 by up to {worst:.3e}")
    n = g.shape[0]
    diag = g[np.arange(n), np.arange(n), :]  # diag[i, k] = g[i,i,k]
    if np.any(diag < -tol) or np.any(diag > 1.0 + tol):
        return False
    d = np.clip(diag, 0.0, 1.0)
    lower = -np.sqrt(d[:, None, :] * d[None, :, :])
    upper = 1.0 + np.sqrt((1.0 - d[:, None, :]) * (1.0 - d[None, :, :]))
    return bool(np.all(g >= lower - tol) and np.all(g <= upper + tol))


def check_l_volterra(t, l: int) -> bool:
    """Whether the cubic matrix has the l-Volterra pattern.

    For ``k <= l`` (1-based) ``p[i,j,k]`` vanishes unless ``k`` is ``i`` or
    ``j``; for every ``k > l`` some ``p[i,j,k] > 0`` with ``i, j != k``.
    """
    t = np.asarray(t, dtype=np.float64)
    m = t.shape[0]
    if not 1 <= l <= m:
        raise ValueError(f"l must lie in 1..{m}, got {l}")
    for k in range(m):
        off = np.ones((m, m), dtype=bool)
        off[k, :] = False
        off[:, k] = False
        if k < l:
            if np.any(t[:, :, k][off] != 0.0):
                return False
        elif not np.any(t[:, :, k][off] > 0.0):
            return False
    return True
