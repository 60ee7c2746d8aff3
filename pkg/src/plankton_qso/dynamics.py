"""Trajectories of the plankton operator and the limit scenarios they follow."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .core import (
    STEP_DIVERGED,
    STEP_NEGATIVE,
    STEP_RENORMALIZED,
    STEP_CLAMPED,
    Parameters,
    _v_step,
    apply_v,
    as_simplex_point,
    require_valid,
)
from .errors import HypothesisError, SimplexError
from .fixed_points import (
    Family,
    lambda1_distance,
    nearest_fixed_point,
    residual,
)

MAX_ITERATIONS = 1_000_000
STEP_TOL = 1e-13
CONSECUTIVE_STEPS = 10
MATCH_TOL = 1e-5
HISTORY_CAPACITY = 2000
# scenario mode refuses initial points this close to being fixed
FIXED_POINT_RESIDUAL = 1e-12

_RUNNING = -1
_CONVERGED = 0
_MAX_ITER = 1
_DIVERGED = 2
_NEGATIVE = 3


class StopReason(str, Enum):
    STEP_BELOW_TOL = "StepBelowTol"
    MAX_ITERATIONS = "MaxIterations"
    DIVERGED = "Diverged"


@njit(cache=True)
def _run(a, x0, max_iter, step_tol, k_required, stride, adaptive, hist_x, hist_n, hist_step):
    # Adaptive mode halves the buffer and doubles the stride when full; fixed
    # mode writes a ring buffer.  ``total`` counts stores, ``last_n`` the
    # iteration of the most recent one.
    cap = hist_x.shape[0]
    x = x0.copy()
    y = np.empty(6)
    hist_x[0, :] = x
    hist_n[0] = 0
    hist_step[0] = math.nan
    total = 1
    last_n = 0
    consecutive = 0
    step = math.nan
    n = 0
    status = _RUNNING
    n_clamped = 0
    n_renorm = 0
    while n < max_iter:
        code = _v_step(a, x, y)
        if code == STEP_DIVERGED:
            status = _DIVERGED
            break
        if code == STEP_NEGATIVE:
            status = _NEGATIVE
            break
        if code == STEP_CLAMPED:
            n_clamped += 1
        elif code == STEP_RENORMALIZED:
            n_renorm += 1
        step = 0.0
        for i in range(6):
            d = abs(y[i] - x[i])
            if d > step:
                step = d
            x[i] = y[i]
        n += 1
        if n % stride == 0:
            if adaptive and total == cap:
                half = 0
                for r in range(0, cap, 2):
                    hist_x[half, :] = hist_x[r, :]
                    hist_n[half] = hist_n[r]
                    hist_step[half] = hist_step[r]
                    half += 1
                total = half
                stride *= 2
            if n % stride == 0:
                slot = total % cap
                hist_x[slot, :] = x
                hist_n[slot] = n
                hist_step[slot] = step
                total += 1
                last_n = n
        if step <= step_tol:
            consecutive += 1
            if consecutive >= k_required:
                status = _CONVERGED
                break
        else:
            consecutive = 0
    if status == _RUNNING:
        status = _MAX_ITER
    if last_n != n:
        if adaptive and total == cap:
            total -= 1
        slot = total % cap
        hist_x[slot, :] = x
        hist_n[slot] = n
        hist_step[slot] = step
        total += 1
    return x, y, n, step, status, total, stride, n_clamped, n_renorm


@njit(cache=True)
def _orbit(a, x0, n_steps, out):
    out[0, :] = x0
    y = np.empty(6)
    for n in range(n_steps):
        code = _v_step(a, out[n], y)
        if code >= STEP_NEGATIVE:
            return n
        out[n + 1, :] = y
    return n_steps


def orbit(params: Parameters, x0, n_steps: int) -> np.ndarray:
    """Every iterate ``x^(0) .. x^(n_steps)`` as an ``(n_steps + 1, 6)`` array, unthinned."""
    require_valid(params)
    x0 = as_simplex_point(x0)
    out = np.empty((int(n_steps) + 1, 6))
    done = _orbit(params.array, x0, int(n_steps), out)
    if done < n_steps:
        raise SimplexError(f"orbit left the simplex at step {done + 1}")
    return out


@dataclass(frozen=True)
class Trajectory:
    initial: np.ndarray
    params: Parameters
    history: np.ndarray  # (m, 6) stored iterates
    history_steps: np.ndarray  # iteration index of each stored iterate
    history_step_norms: np.ndarray  # step norm that produced each stored iterate (nan at n=0)
    n_steps: int
    final: np.ndarray
    step_norm: float
    stride: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "x1", "x2", "x3", "x4", "x5", "x6", "step_norm"])
        for n, x, s in zip(self.history_steps, self.history, self.history_step_norms):
            writer.writerow([int(n)] + [f"{v:.17g}" for v in x] + [f"{s:.17g}"])
        return buf.getvalue()


@dataclass(frozen=True)
class ConvergenceVerdict:
    converged: bool
    limit: np.ndarray
    matched_family: Family | None
    match_distance: float
    nearest_family: Family
    iterations_used: int
    stop_reason: StopReason
    step_norm: float
    lambda_bar: float | None = None
    ties: tuple[Family, ...] = field(default_factory=tuple)
    n_clamped: int = 0
    n_renormalized: int = 0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "limit": [float(v) for v in self.limit],
            "matched_family": None if self.matched_family is None else self.matched_family.value,
            "match_distance": self.match_distance,
            "nearest_family": self.nearest_family.value,
            "ties": [f.value for f in self.ties],
            "lambda_bar": self.lambda_bar,
            "iterations_used": self.iterations_used,
            "stop_reason": self.stop_reason.value,
            "step_norm": self.step_norm,
            "n_clamped": self.n_clamped,
            "n_renormalized": self.n_renormalized,
        }


def match_limit(params: Parameters, x, tol: float = MATCH_TOL, fixed_points=None):
    """Nearest fixed-point family to ``x``.

    Returns ``(matched, nearest, distance, ties, lambda_bar)`` where
    ``matched`` is ``None`` unless the nearest family is within ``tol`` and
    ``ties`` lists every family within ``tol``.
    """
    ranked = nearest_fixed_point(params, x, fixed_points)
    family, distance, _ = ranked[0]
    within = []
    for fam, d, _ in ranked:
        if d <= tol and fam not in within:
            within.append(fam)
    matched = family if distance <= tol else None
    lambda_bar = None
    if Family.LAMBDA1 in within:
        lambda_bar = lambda1_distance(x)[1]
    return matched, family, float(distance), tuple(within) if len(within) > 1 else (), lambda_bar


def iterate(
    params: Parameters,
    x0,
    max_iterations: int = MAX_ITERATIONS,
    step_tol: float = STEP_TOL,
    K: int = CONSECUTIVE_STEPS,
    stride: int | None = None,
    match_tol: float = MATCH_TOL,
) -> tuple[Trajectory, ConvergenceVerdict]:
    """Iterate V from ``x0`` until ``K`` consecutive steps have infinity norm ``<= step_tol``.

    ``stride=None`` thins the stored history adaptively so that at most
    2000 iterates are kept (every ``~n/1000``-th point of an ``n``-step
    run); an integer stores every ``stride``-th iterate, keeping the most
    recent 2000.  The final iterate is always stored; the initial point is
    kept unless a fixed-stride ring buffer wraps.
    """
    require_valid(params)
    x0 = as_simplex_point(x0)
    if max_iterations < 0 or K < 1:
        raise ValueError("max_iterations must be >= 0 and K >= 1")
    adaptive = stride is None
    stride0 = 1 if adaptive else int(stride)
    if stride0 < 1:
        raise ValueError("stride must be >= 1")
    hist_x = np.empty((HISTORY_CAPACITY, 6))
    hist_n = np.empty(HISTORY_CAPACITY, dtype=np.int64)
    hist_step = np.empty(HISTORY_CAPACITY)
    x, bad, n, step, status, total, final_stride, n_clamped, n_renorm = _run(
        params.array, x0, int(max_iterations), float(step_tol), int(K), stride0, adaptive, hist_x, hist_n, hist_step
    )
    if total <= HISTORY_CAPACITY:
        keep = np.arange(total)
    else:
        keep = (np.arange(HISTORY_CAPACITY) + total) % HISTORY_CAPACITY
    if status == _NEGATIVE:
        raise SimplexError(
            f"iterate left the simplex after {n} steps: V({x.tolist()}) = {bad.tolist()}; "
            "rates must have slipped through validation"
        )
    reason = {_CONVERGED: StopReason.STEP_BELOW_TOL, _MAX_ITER: StopReason.MAX_ITERATIONS, _DIVERGED: StopReason.DIVERGED}[
        status
    ]
    trajectory = Trajectory(
        initial=x0,
        params=params,
        history=hist_x[keep],
        history_steps=hist_n[keep],
        history_step_norms=hist_step[keep],
        n_steps=int(n),
        final=x.copy(),
        step_norm=float(step),
        stride=int(final_stride),
    )
    matched, nearest, distance, ties, lambda_bar = match_limit(params, x, match_tol)
    verdict = ConvergenceVerdict(
        converged=reason is StopReason.STEP_BELOW_TOL,
        limit=x.copy(),
        matched_family=matched,
        match_distance=distance,
        nearest_family=nearest,
        iterations_used=int(n),
        stop_reason=reason,
        step_norm=float(step),
        lambda_bar=lambda_bar,
        ties=ties,
        n_clamped=int(n_clamped),
        n_renormalized=int(n_renorm),
    )
    return trajectory, verdict


@dataclass(frozen=True)
class ReducedBacteriaMap:
    """``f(x) = x (1 + a11 - a12 - a11 x)``: the bacteria share when only B and I are present."""

    a11: float
    a12: float

    def __post_init__(self):
        for v in (self.a11, self.a12):
            if not 0.0 < v <= 1.0:
                raise ValueError(f"rates must lie in (0, 1], got {v}")

    def __call__(self, x4: float) -> float:
        return x4 * (1.0 + self.a11 - self.a12 - self.a11 * x4)

    def derivative(self, x4: float) -> float:
        return 1.0 + self.a11 - self.a12 - 2.0 * self.a11 * x4

    @property
    def fixed_points(self) -> tuple[float, float]:
        return 0.0, 1.0 - self.a12 / self.a11


def reduced_bacteria_map(a11: float, a12: float, x4: float) -> float:
    return ReducedBacteriaMap(a11, a12)(x4)


class Scenario(str, Enum):
    NO_DIM = "NoDIM"
    NO_DOM = "NoDOM"
    NO_BACTERIA = "NoBacteria"
    NO_PHYTO = "NoPhyto"
    NO_ZOO_NO_MIXO = "NoZooNoMixo"
    ALL_SPECIES = "AllSpecies"


@dataclass(frozen=True)
class PredictedLimit:
    """Expected limit: an exact point, or (``point is None``) membership of the ``Lambda1`` segment."""

    source: str
    point: np.ndarray | None
    family: Family

    @property
    def on_segment(self) -> bool:
        return self.point is None

    def distance(self, x) -> float:
        if self.point is None:
            return lambda1_distance(x)[0]
        return float(np.max(np.abs(np.asarray(x) - self.point)))

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "family": self.family.value,
            "point": None if self.point is None else [float(v) for v in self.point],
        }


def _require(ok: bool, name: str, scenario: Scenario):
    if not ok:
        raise HypothesisError(f"{scenario.value}: hypothesis {name} fails")


def scenario(params: Parameters, x0, tag: Scenario | str) -> PredictedLimit:
    """Predicted limit of the trajectory from ``x0`` under one of the proved scenarios.

    Hypotheses are checked exactly as stated; a violated one raises
    :class:`HypothesisError` naming it.  Initial points that are already
    fixed are refused.
    """
    tag = Scenario(tag)
    require_valid(params)
    p = params
    x = as_simplex_point(x0)
    if residual(p, x) <= FIXED_POINT_RESIDUAL:
        raise HypothesisError(f"{tag.value}: initial point {x.tolist()} is a fixed point")
    if tag is Scenario.NO_DIM:
        image = apply_v(p, x)
        _require(x[5] == 0.0, "x6=0", tag)
        _require(image[5] == 0.0, "V(x)6=0", tag)
        return PredictedLimit(tag.value, np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]), Family.LAMBDA1)
    if tag is Scenario.NO_DOM:
        image = apply_v(p, x)
        _require(x[4] == 0.0, "x5=0", tag)
        _require(image[4] == 0.0, "V(x)5=0", tag)
        if p.a11 <= p.a12:
            return PredictedLimit(tag.value, np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), Family.LAMBDA1)
        r = p.a12 / p.a11
        return PredictedLimit(tag.value, np.array([0.0, 0.0, 0.0, 1.0 - r, 0.0, r]), Family.LAMBDA2)
    if tag is Scenario.NO_BACTERIA:
        _require(x[3] == 0.0, "x4=0", tag)
    elif tag is Scenario.NO_PHYTO:
        _require(x[0] == 0.0, "x1=0", tag)
        _require(p.a7 <= p.a8 + p.a9, "a7≤a8+a9", tag)
        _require(p.a10 + p.a11 <= p.a12, "a10+a11≤a12", tag)
    elif tag is Scenario.NO_ZOO_NO_MIXO:
        _require(x[1] == 0.0 and x[2] == 0.0, "x2=x3=0", tag)
        _require(p.a1 <= p.a4, "a1≤a4", tag)
        _require(p.a10 + p.a11 <= p.a12, "a10+a11≤a12", tag)
    elif tag is Scenario.ALL_SPECIES:
        _require(p.a1 <= p.a4, "a1≤a4", tag)
        _require(p.a2 <= p.a5 + p.a6, "a2≤a5+a6", tag)
        _require(p.a3 + p.a7 <= p.a8 + p.a9, "a3+a7≤a8+a9", tag)
        _require(p.a10 + p.a11 <= p.a12, "a10+a11≤a12", tag)
    return PredictedLimit(tag.value, None, Family.LAMBDA1)

