"""Linear stability of fixed points of the plankton operator."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import N_SPECIES, Parameters, apply_v, require_valid, vertex
from .errors import EigenvalueError, ModelInconsistencyError, NotAFixedPointError
from .fixed_points import FixedPoint

UNIT_CIRCLE_TOL = 1e-9
CLASSIFY_RESIDUAL = 1e-8


class Classification(str, Enum):
    ATTRACTING = "Attracting"
    REPELLING = "Repelling"
    SADDLE = "Saddle"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass(frozen=True)
class StabilityReport:
    point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    classification: Classification
    unit_circle_tolerance: float

    def to_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "classification": self.classification.value,
            "tolerance": self.unit_circle_tolerance,
        }


def jacobian(params: Parameters, x) -> np.ndarray:
    """Matrix of partial derivatives ``d x'_i / d x_j`` of V, as a map on R^6."""
    require_valid(params)
    p = params
    x1, x2, x3, x4, x5, x6 = np.asarray(x, dtype=np.float64)
    return np.array(
        [
            [1 - p.a4 + p.a1 * x6 - p.a2 * x2 - p.a3 * x3, -p.a2 * x1, -p.a3 * x1, 0.0, 0.0, p.a1 * x1],
            [p.a2 * x2, 1 - p.a5 - p.a6 + p.a2 * x1, 0.0, 0.0, 0.0, 0.0],
            [p.a3 * x3, 0.0, 1 - p.a8 - p.a9 + p.a3 * x1 + p.a7 * x6, 0.0, 0.0, p.a7 * x3],
            [0.0, 0.0, 0.0, 1 - p.a12 + p.a10 * x5 + p.a11 * x6, p.a10 * x4, p.a11 * x4],
            [p.a4, p.a5, p.a9, -p.a10 * x5, 1 - p.a10 * x4, 0.0],
            [-p.a1 * x6, p.a6, p.a8 - p.a7 * x6, p.a12 - p.a11 * x6, 0.0, 1 - p.a1 * x1 - p.a7 * x3 - p.a11 * x4],
        ]
    )


def sort_eigenvalues(values) -> np.ndarray:
    """Descending modulus; near-equal moduli are ordered by real then imaginary part, descending."""
    values = np.asarray(values, dtype=np.complex128)
    mod = np.round(np.abs(values), 12)
    order = np.lexsort((-values.imag, -values.real, -mod))
    return values[order]


def eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a dense real square matrix (LAPACK Hessenberg-QR)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        values = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(f"eigenvalue iteration failed: {exc}") from exc
    return sort_eigenvalues(values)


def classify_spectrum(values, tol: float = UNIT_CIRCLE_TOL) -> Classification:
    mod = np.abs(np.asarray(values))
    if np.any(np.abs(mod - 1.0) <= tol):
        return Classification.NON_HYPERBOLIC
    if np.all(mod < 1.0 - tol):
        return Classification.ATTRACTING
    if np.all(mod > 1.0 + tol):
        return Classification.REPELLING
    return Classification.SADDLE


def classify(params: Parameters, fp: FixedPoint, tol: float = UNIT_CIRCLE_TOL) -> StabilityReport:
    """Hyperbolicity type of a fixed point from the moduli of its Jacobian eigenvalues.

    Refuses points whose residual exceeds 1e-8: the classification only
    makes sense at genuine fixed points.
    """
    if not fp.residual <= CLASSIFY_RESIDUAL:
        raise NotAFixedPointError(f"{fp.family.value} candidate has residual {fp.residual:.3e} > {CLASSIFY_RESIDUAL}")
    j = jacobian(params, fp.point)
    values = eigenvalues(j)
    return StabilityReport(
        point=np.array(fp.point, dtype=np.float64),
        jacobian=j,
        eigenvalues=values,
        classification=classify_spectrum(values, tol),
        unit_circle_tolerance=tol,
    )


def lambda2_spectrum(params: Parameters) -> np.ndarray:
    """Closed-form eigenvalues of the Jacobian at ``(0,0,0,1-a12/a11,0,a12/a11)``."""
    p = params
    r = p.a12 / p.a11
    return sort_eigenvalues(
        [
            1.0,
            1 - p.a4 + p.a1 * r,
            1 - p.a8 - p.a9 + p.a7 * r,
            1 - p.a5 - p.a6,
            1 - p.a10 + p.a10 * r,
            1 - p.a11 + p.a12,
        ]
    )


@dataclass(frozen=True)
class VertexAudit:
    residuals: tuple[float, ...]
    fixed: tuple[bool, ...]
    expected_residuals: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "residuals": list(self.residuals),
            "fixed": list(self.fixed),
            "expected_residuals": list(self.expected_residuals),
        }


def vertex_audit(params: Parameters, tol: float = 1e-15) -> VertexAudit:
    """Check that e1..e4 move, e5 and e6 stay put, and {e5, e6} is not a 2-cycle.

    The residual at each moving vertex is compared with its closed form
    (``a4``, ``a5+a6``, ``a8+a9``, ``a12``).
    """
    require_valid(params)
    p = params
    expected = (p.a4, p.a5 + p.a6, p.a8 + p.a9, p.a12, 0.0, 0.0)
    residuals, fixed, problems = [], [], []
    images = {}
    for i in range(1, N_SPECIES + 1):
        e = vertex(i)
        images[i] = apply_v(params, e)
        r = float(np.max(np.abs(images[i] - e)))
        residuals.append(r)
        fixed.append(r == 0.0)
        if abs(r - expected[i - 1]) > tol:
            problems.append(f"residual at e{i} is {r!r}, expected {expected[i - 1]!r}")
    for i in range(1, 5):
        if fixed[i - 1]:
            problems.append(f"e{i} is a fixed point")
    for i, j in ((5, 6), (6, 5)):
        if not fixed[i - 1]:
            problems.append(f"e{i} is not a fixed point")
        if np.array_equal(images[i], vertex(j)):
            problems.append(f"V(e{i}) = e{j}")
    if problems:
        raise ModelInconsistencyError("; ".join(problems))
    return VertexAudit(tuple(residuals), tuple(fixed), tuple(float(v) for v in expected))
