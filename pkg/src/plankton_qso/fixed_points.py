"""Closed-form fixed points of the plankton operator.

Seven families exist.  ``Lambda1`` is the segment ``(0,0,0,0,t,1-t)`` of
"only matter remains" equilibria; the others are isolated points whose
existence depends on inequalities between the rates.  Families 5 and 6 are
parametrised by a root of a quadratic, family 7 by the root of a linear
equation obtained from the unit-sum identity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .core import Parameters, apply_v, evolution_map, require_valid
from .errors import DegenerateEquationError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA1_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
FEASIBLE_RESIDUAL = 1e-10
QUADRATIC_EPS = 1e-14


class Family(str, Enum):
    LAMBDA1 = "Lambda1"
    LAMBDA2 = "Lambda2"
    LAMBDA3 = "Lambda3"
    LAMBDA4 = "Lambda4"
    LAMBDA5 = "Lambda5"
    LAMBDA6 = "Lambda6"
    LAMBDA7 = "Lambda7"


@dataclass(frozen=True)
class Condition:
    name: str
    holds: bool
    boundary: bool = False

    def to_dict(self) -> dict:
        return {"name": self.name, "holds": bool(self.holds), "boundary": bool(self.boundary)}


def _nonstrict(name: str, slack: float) -> Condition:
    return Condition(name, slack >= 0.0, slack == 0.0)


def _strict(name: str, slack: float) -> Condition:
    return Condition(name, slack > 0.0)


@dataclass(frozen=True)
class FixedPoint:
    family: Family
    point: np.ndarray
    free_parameter: float | None
    feasible: bool
    conditions: tuple[Condition, ...]
    residual: float

    @property
    def on_boundary(self) -> bool:
        return any(c.boundary for c in self.conditions)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "coordinates": [float(v) for v in self.point],
            "free_parameter": None if self.free_parameter is None else float(self.free_parameter),
            "feasible": bool(self.feasible),
            "residual": float(self.residual),
            "conditions": [c.to_dict() for c in self.conditions],
        }


@dataclass(frozen=True)
class QuadraticCoefficients:
    a: float
    b: float
    c: float


def solve_quadratic(coeffs: QuadraticCoefficients) -> list[float]:
    """Real roots of ``a x^2 + b x + c = 0`` in ascending order, duplicates collapsed.

    Falls back to the linear equation when ``|a| <= 1e-14``.  Uses the
    cancellation-free form ``q = -(b + sign(b) sqrt(disc)) / 2``.
    """
    a, b, c = float(coeffs.a), float(coeffs.b), float(coeffs.c)
    if not all(math.isfinite(v) for v in (a, b, c)):
        raise DegenerateEquationError(f"non-finite coefficients {(a, b, c)}")
    if abs(a) <= QUADRATIC_EPS:
        if abs(b) <= QUADRATIC_EPS:
            if abs(c) <= QUADRATIC_EPS:
                raise DegenerateEquationError("all coefficients vanish")
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        # b == 0 and disc == 0, hence c == 0
        return [0.0]
    roots = sorted({q / a, c / q})
    return roots


def residual(params: Parameters, x) -> float:
    """Infinity norm of ``V(x) - x`` for a simplex point."""
    return float(np.max(np.abs(apply_v(params, x) - np.asarray(x, dtype=np.float64))))


def _raw_residual(params: Parameters, x: np.ndarray) -> float:
    if not np.all(np.isfinite(x)):
        return math.inf
    return float(np.max(np.abs(evolution_map(params, x) - x)))


def lambda1_point(lam: float) -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, 0.0, lam, 1.0 - lam])


def lambda1_distance(x) -> tuple[float, float]:
    """Infinity distance from ``x`` to the segment ``(0,0,0,0,t,1-t)``, and the nearest ``t``."""
    x = np.asarray(x, dtype=np.float64)
    # with u = x5 - t and w = x6 - 1 + t, u + w is fixed; max(|u|, |w|) is smallest at u = w
    s = x[4] + x[5] - 1.0
    t = min(max(x[4] - 0.5 * s, 0.0), 1.0)
    d = max(np.max(np.abs(x[:4])), abs(x[4] - t), abs(x[5] - 1.0 + t))
    return float(d), float(t)


def is_on_lambda1_segment(x, tol: float = 1e-5) -> bool:
    return lambda1_distance(x)[0] <= tol


def _make(params, family, x, lam, guards: Sequence[Condition]) -> FixedPoint:
    x = np.asarray(x, dtype=np.float64)
    finite = bool(np.all(np.isfinite(x)))
    in_simplex = finite and x.min() >= 0.0 and abs(math.fsum(x) - 1.0) <= FEASIBLE_RESIDUAL
    conditions = tuple(guards) + (Condition("x≥0, Σx=1", in_simplex),)
    feasible = all(c.holds for c in conditions)
    res = _raw_residual(params, x)
    if feasible and res > FEASIBLE_RESIDUAL:
        logger.warning("%s candidate %s has residual %.3e", family.value, x.tolist(), res)
    return FixedPoint(family, x, None if lam is None else float(lam), feasible, conditions, res)


def lambda1_candidates(params: Parameters, grid: Iterable[float] = DEFAULT_LAMBDA1_GRID) -> list[FixedPoint]:
    out = []
    for lam in grid:
        guard = Condition("0≤λ≤1", 0.0 <= lam <= 1.0, lam in (0.0, 1.0))
        out.append(_make(params, Family.LAMBDA1, lambda1_point(lam), lam, [guard]))
    return out


def lambda2_candidates(params: Parameters) -> list[FixedPoint]:
    p = params
    x6 = p.a12 / p.a11
    x = [0.0, 0.0, 0.0, 1.0 - x6, 0.0, x6]
    return [_make(p, Family.LAMBDA2, x, None, [_nonstrict("a12≤a11", p.a11 - p.a12)])]


def lambda3_candidates(params: Parameters) -> list[FixedPoint]:
    p = params
    d = p.a7 * p.a12 - p.a11 * (p.a8 + p.a9)
    guards = [
        _nonstrict("a12a7−a11(a8+a9)≥0", d),
        _nonstrict("a7(a10−a12)−(a8+a9)(a10−a11)≥0", p.a7 * (p.a10 - p.a12) - (p.a8 + p.a9) * (p.a10 - p.a11)),
    ]
    denom = p.a10 * (p.a7 * p.a9 + d)
    if denom == 0.0:
        return []
    lam = p.a9 * (p.a7 * p.a10 - p.a10 * (p.a8 + p.a9) - d) / denom
    x = [0.0, 0.0, d / (p.a7 * p.a9) * lam, lam, d / (p.a7 * p.a10), (p.a8 + p.a9) / p.a7]
    return [_make(p, Family.LAMBDA3, x, lam, guards)]


def lambda4_candidates(params: Parameters) -> list[FixedPoint]:
    p = params
    e = p.a1 * p.a12 - p.a4 * p.a11
    g = p.a10 * p.a1 - p.a10 * p.a4 - p.a12 * p.a1 + p.a11 * p.a4
    guards = [_nonstrict("a12a1−a11a4≥0", e), _nonstrict("a10a1−a10a4−a12a1+a11a4≥0", g)]
    denom = p.a10 * (e + p.a4 * p.a1)
    if denom == 0.0:
        return []
    lam = p.a4 * g / denom
    x = [e / (p.a1 * p.a4) * lam, 0.0, 0.0, lam, e / (p.a1 * p.a10), p.a4 / p.a1]
    return [_make(p, Family.LAMBDA4, x, lam, guards)]


def lambda5_coefficients(params: Parameters) -> QuadraticCoefficients:
    p = params
    a = p.a3 * p.a11**2 + p.a10 * p.a11 * (p.a7 - p.a1 - p.a3)
    b = (
        p.a10 * p.a11 * (p.a3 + p.a4 - p.a8 - p.a9)
        + p.a10 * p.a12 * (p.a3 + p.a1 - p.a7)
        + p.a10 * (p.a1 * p.a9 - p.a4 * p.a7)
        - 2.0 * p.a3 * p.a11 * p.a12
    )
    c = p.a10 * p.a12 * (p.a8 + p.a9 - p.a3 - p.a4) + p.a3 * p.a12**2 + p.a4 * p.a8 * p.a10
    return QuadraticCoefficients(a, b, c)


def lambda6_coefficients(params: Parameters) -> QuadraticCoefficients:
    p = params
    a = p.a2 * p.a11**2 - p.a10 * p.a11 * (p.a1 + p.a2)
    b = (
        p.a10 * p.a11 * (p.a2 + p.a4 - p.a5 - p.a6)
        + p.a10 * p.a12 * (p.a1 + p.a2)
        + p.a1 * p.a5 * p.a10
        - 2.0 * p.a2 * p.a11 * p.a12
    )
    c = p.a10 * p.a12 * (p.a5 + p.a6 - p.a2 - p.a4) + p.a2 * p.a12**2 + p.a4 * p.a6 * p.a10
    return QuadraticCoefficients(a, b, c)


def _roots(coeffs: QuadraticCoefficients, family: Family) -> list[float]:
    try:
        return solve_quadratic(coeffs)
    except DegenerateEquationError:
        logger.info("%s: degenerate quadratic %s", family.value, coeffs)
        return []


def lambda5_candidates(params: Parameters) -> list[FixedPoint]:
    p = params
    out = []
    for lam in _roots(lambda5_coefficients(p), Family.LAMBDA5):
        guards = [
            _strict("a4<a1", p.a1 - p.a4),
            _strict("a4/a1<λ", lam - p.a4 / p.a1),
            _strict("λ<a12/a11", p.a12 / p.a11 - lam),
            _strict("λ<(a8+a9)/a7", (p.a8 + p.a9) / p.a7 - lam),
        ]
        if p.a1 * p.a9 < p.a4 * p.a7:
            guards.append(_strict("λ<a4a8/(a4a7−a1a9)", p.a4 * p.a8 / (p.a4 * p.a7 - p.a1 * p.a9) - lam))
        x5_scaled = p.a12 - p.a11 * lam
        if x5_scaled == 0.0:
            continue
        x = [
            (p.a8 + p.a9 - p.a7 * lam) / p.a3,
            0.0,
            (p.a1 * lam - p.a4) / p.a3,
            (p.a4 * p.a8 + (p.a1 * p.a9 - p.a4 * p.a7) * lam) / (p.a3 * x5_scaled),
            x5_scaled / p.a10,
            lam,
        ]
        out.append(_make(p, Family.LAMBDA5, x, lam, guards))
    return out


def lambda6_candidates(params: Parameters) -> list[FixedPoint]:
    p = params
    out = []
    for lam in _roots(lambda6_coefficients(p), Family.LAMBDA6):
        guards = [
            _strict("a4<a1", p.a1 - p.a4),
            _strict("a4/a1<λ", lam - p.a4 / p.a1),
            _strict("λ<a12/a11", p.a12 / p.a11 - lam),
        ]
        x5_scaled = p.a12 - p.a11 * lam
        if x5_scaled == 0.0:
            continue
        x = [
            (p.a5 + p.a6) / p.a2,
            (p.a1 * lam - p.a4) / p.a2,
            0.0,
            (p.a4 * p.a6 + p.a1 * p.a5 * lam) / (p.a2 * x5_scaled),
            x5_scaled / p.a10,
            lam,
        ]
        out.append(_make(p, Family.LAMBDA6, x, lam, guards))
    return out


def lambda7_candidates(params: Parameters) -> list[FixedPoint]:
    p = params
    g = p.a2 * p.a8 + p.a2 * p.a9 - p.a3 * p.a5 - p.a3 * p.a6
    h = p.a2 * p.a7 * p.a12 - p.a11 * g
    if h == 0.0:
        return []
    x1 = (p.a5 + p.a6) / p.a2
    x6 = g / (p.a2 * p.a7)
    x5 = h / (p.a2 * p.a7 * p.a10)
    # x2 and x4 are affine in the free coordinate x3 = λ
    x2_0 = (p.a1 * g - p.a2 * p.a4 * p.a7) / (p.a2**2 * p.a7)
    x2_1 = -p.a3 / p.a2
    x4_0 = p.a7 * (p.a4 * (p.a5 + p.a6) + p.a2 * p.a5 * x2_0) / h
    x4_1 = p.a7 * (p.a2 * p.a5 * x2_1 + p.a2 * p.a9) / h
    slope = x2_1 + 1.0 + x4_1
    if slope == 0.0:
        return []
    lam = (1.0 - (x1 + x2_0 + x4_0 + x5 + x6)) / slope
    x = [x1, x2_0 + x2_1 * lam, lam, x4_0 + x4_1 * lam, x5, x6]
    guards = [
        _strict("a2a4a7/a1<a2a8+a2a9−a3a5−a3a6", g - p.a2 * p.a4 * p.a7 / p.a1),
        _strict("a2a8+a2a9−a3a5−a3a6<a2a7a12/a11", p.a2 * p.a7 * p.a12 / p.a11 - g),
        _strict("λ<(a1(a2a8+a2a9−a3a5−a3a6)−a2a4a7)/(a2a3a7)", (p.a1 * g - p.a2 * p.a4 * p.a7) / (p.a2 * p.a3 * p.a7) - lam),
    ]
    return [_make(p, Family.LAMBDA7, x, lam, guards)]


_ISOLATED = {
    Family.LAMBDA2: lambda2_candidates,
    Family.LAMBDA3: lambda3_candidates,
    Family.LAMBDA4: lambda4_candidates,
    Family.LAMBDA5: lambda5_candidates,
    Family.LAMBDA6: lambda6_candidates,
    Family.LAMBDA7: lambda7_candidates,
}


def family_candidates(params: Parameters, family: Family, lambda1_grid=DEFAULT_LAMBDA1_GRID) -> list[FixedPoint]:
    """Every computable member of one family, feasible or not."""
    require_valid(params)
    family = Family(family)
    if family is Family.LAMBDA1:
        return lambda1_candidates(params, lambda1_grid)
    return _ISOLATED[family](params)


def feasible_members(params: Parameters, family: Family) -> list[FixedPoint]:
    return [fp for fp in family_candidates(params, family) if fp.feasible]


def enumerate_fixed_points(
    params: Parameters,
    lambda1_grid: Iterable[float] | None = None,
    include_infeasible: bool = False,
) -> list[FixedPoint]:
    """All fixed points of V for the given rates, ordered by family.

    The ``Lambda1`` continuum is sampled on ``lambda1_grid`` (default
    ``0, 0.25, 0.5, 0.75, 1``); use :func:`is_on_lambda1_segment` for
    membership tests.
    """
    require_valid(params)
    grid = DEFAULT_LAMBDA1_GRID if lambda1_grid is None else tuple(lambda1_grid)
    found = lambda1_candidates(params, grid)
    for family in _ISOLATED:
        found.extend(_ISOLATED[family](params))
    if include_infeasible:
        return found
    return [fp for fp in found if fp.feasible]


def nearest_fixed_point(params: Parameters, x, fixed_points: Sequence[FixedPoint] | None = None):
    """Nearest feasible family member to ``x`` (``Lambda1`` by segment distance).

    Returns a list of ``(family, distance, member)`` sorted by distance;
    ``member`` is ``None`` for the segment.
    """
    x = np.asarray(x, dtype=np.float64)
    if fixed_points is None:
        fixed_points = enumerate_fixed_points(params)
    d1, t = lambda1_distance(x)
    ranked = [(Family.LAMBDA1, d1, None)]
    for fp in fixed_points:
        if fp.family is Family.LAMBDA1:
            continue
        ranked.append((fp.family, float(np.max(np.abs(fp.point - x))), fp))
    ranked.sort(key=lambda item: item[1])
    return ranked

