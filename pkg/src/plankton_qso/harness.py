"""Monte Carlo checks of the proved and conjectured limit statements.

Each target pairs a set of rate constraints with a face of the simplex
for initial points and a predicted limit.  Runs draw rates by rejection
sampling, initial points from a flat Dirichlet on the free coordinates,
iterate to convergence and compare the limit with the prediction.

Random streams are keyed by ``(seed, draw)`` for rates and
``(seed, draw, point)`` for initial points, so serial and parallel
execution give the same report.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import RATE_NAMES, SIMPLEX_CONDITIONS, Constraint, Parameters
from .dynamics import (
    CONSECUTIVE_STEPS,
    FIXED_POINT_RESIDUAL,
    MATCH_TOL,
    MAX_ITERATIONS,
    STEP_TOL,
    PredictedLimit,
    Scenario,
    iterate,
    scenario,
)
from .errors import HypothesisError, SamplingError
from .fixed_points import Family, feasible_members, residual

logger = logging.getLogger(__name__)

STRICT_MARGIN = 1e-6
MAX_REJECTIONS = 1_000_000
SAMPLING_BATCH = 8192
COUNTEREXAMPLE_CAP = 20
_MAX_RESAMPLES = 100


class Target(str, Enum):
    PROP51 = "Prop51"
    PROP52 = "Prop52"
    PROP53 = "Prop53"
    PROP55 = "Prop55"
    PROP56 = "Prop56"
    PROPK1 = "PropK1"
    CONJECTURE1A = "Conjecture1a"
    CONJECTURE1B = "Conjecture1b"
    CONJECTURE2 = "Conjecture2"

    @property
    def proved(self) -> bool:
        return not self.value.startswith("Conjecture")


def _c(name: str, slack, strict: bool = False) -> Constraint:
    return Constraint(name, slack, strict)


A11_GT_A12 = _c("a11>a12", lambda r: r.a11 - r.a12, strict=True)
A10_A11_LE_A12 = _c("a10+a11≤a12", lambda r: r.a12 - r.a10 - r.a11)
A1_LE_A4 = _c("a1≤a4", lambda r: r.a4 - r.a1)

# (variant name -> extra constraints, extra zero coordinates); first entry is the default
_VARIANTS: dict[Target, dict[str, tuple[tuple[Constraint, ...], tuple[int, ...]]]] = {
    Target.PROP52: {
        "any": ((), ()),
        "a11<=a12": ((_c("a11≤a12", lambda r: r.a12 - r.a11),), ()),
        "a11>a12": ((A11_GT_A12,), ()),
    },
    Target.CONJECTURE1A: {
        "params": ((_c("a3≤a7", lambda r: r.a7 - r.a3), _c("a7≤a8+a9", lambda r: r.a8 + r.a9 - r.a7)), ()),
        "x3=0": ((), (2,)),
    },
    Target.CONJECTURE2: {
        "params": ((A1_LE_A4,), ()),
        "x1=0": ((), (0,)),
    },
}
_VARIANTS[Target.CONJECTURE1B] = _VARIANTS[Target.CONJECTURE1A]

_BASE: dict[Target, tuple[tuple[Constraint, ...], tuple[int, ...]]] = {
    Target.PROP51: ((), (1, 2, 3, 5)),
    Target.PROP52: ((), (0, 1, 2, 4)),
    Target.PROP53: ((), (3,)),
    Target.PROPK1: ((_c("a7≤a8+a9", lambda r: r.a8 + r.a9 - r.a7), A10_A11_LE_A12), (0,)),
    Target.PROP55: ((A1_LE_A4, A10_A11_LE_A12), (1, 2)),
    Target.PROP56: (
        (
            A1_LE_A4,
            _c("a2≤a5+a6", lambda r: r.a5 + r.a6 - r.a2),
            _c("a3+a7≤a8+a9", lambda r: r.a8 + r.a9 - r.a3 - r.a7),
            A10_A11_LE_A12,
        ),
        (),
    ),
    Target.CONJECTURE1A: (
        (
            A11_GT_A12,
            _c("a4<a1", lambda r: r.a1 - r.a4, strict=True),
            _c("a12a1−a11a4>0", lambda r: r.a12 * r.a1 - r.a11 * r.a4, strict=True),
            _c("a10a1−a10a4−a12a1+a11a4>0", lambda r: r.a10 * r.a1 - r.a10 * r.a4 - r.a12 * r.a1 + r.a11 * r.a4, strict=True),
        ),
        (),
    ),
    Target.CONJECTURE1B: (
        (A11_GT_A12, _c("a12a1−a11a4≤0", lambda r: r.a11 * r.a4 - r.a12 * r.a1)),
        (),
    ),
    Target.CONJECTURE2: (
        (
            A11_GT_A12,
            _c("a7>a8+a9", lambda r: r.a7 - r.a8 - r.a9, strict=True),
            _c("a12a7−a11(a8+a9)>0", lambda r: r.a12 * r.a7 - r.a11 * (r.a8 + r.a9), strict=True),
            _c(
                "a10(a7−(a8+a9))−(a12a7−a11(a8+a9))>0",
                lambda r: r.a10 * (r.a7 - r.a8 - r.a9) - (r.a12 * r.a7 - r.a11 * (r.a8 + r.a9)),
                strict=True,
            ),
        ),
        (),
    ),
}

_SCENARIO = {
    Target.PROP51: Scenario.NO_DIM,
    Target.PROP52: Scenario.NO_DOM,
    Target.PROP53: Scenario.NO_BACTERIA,
    Target.PROPK1: Scenario.NO_PHYTO,
    Target.PROP55: Scenario.NO_ZOO_NO_MIXO,
    Target.PROP56: Scenario.ALL_SPECIES,
}

_CONJECTURE_FAMILY = {
    Target.CONJECTURE1A: Family.LAMBDA4,
    Target.CONJECTURE1B: Family.LAMBDA2,
    Target.CONJECTURE2: Family.LAMBDA3,
}


def default_variant(target: Target) -> str | None:
    variants = _VARIANTS.get(Target(target))
    return None if variants is None else next(iter(variants))


def target_variants(target: Target) -> tuple[str, ...]:
    return tuple(_VARIANTS.get(Target(target), {}))


def target_constraints(target: Target, variant: str | None = None) -> tuple[Constraint, ...]:
    """Simplex-invariance conditions plus the target's (and variant's) rate hypotheses."""
    target = Target(target)
    extra, _ = _variant(target, variant)
    return SIMPLEX_CONDITIONS + _BASE[target][0] + extra


def target_zero_coordinates(target: Target, variant: str | None = None) -> tuple[int, ...]:
    target = Target(target)
    _, zeros = _variant(target, variant)
    return tuple(sorted(set(_BASE[target][1]) | set(zeros)))


def _variant(target: Target, variant: str | None):
    variants = _VARIANTS.get(target)
    if variants is None:
        if variant is not None:
            raise ValueError(f"{target.value} has no variants")
        return (), ()
    if variant is None:
        variant = next(iter(variants))
    if variant not in variants:
        raise ValueError(f"{target.value}: unknown variant {variant!r}; choose from {sorted(variants)}")
    return variants[variant]


class _Columns:
    """Attribute view ``a1..a12`` over the columns of a batch of rate vectors."""

    def __init__(self, batch: np.ndarray):
        for i, name in enumerate(RATE_NAMES):
            setattr(self, name, batch[:, i])


def sample_parameters(
    constraints: Sequence[Constraint],
    rng: np.random.Generator,
    margin: float = STRICT_MARGIN,
    max_rejections: int = MAX_REJECTIONS,
) -> Parameters:
    """Uniform rejection sampling on (0, 1]^12 subject to ``constraints``.

    The simplex-invariance conditions are always enforced.  Strict
    inequalities must hold with slack ``> margin``.
    """
    constraints = tuple(SIMPLEX_CONDITIONS) + tuple(c for c in constraints if c not in SIMPLEX_CONDITIONS)
    rejected = 0
    batch_size = 16  # grows geometrically, so loose constraints stay cheap and tight ones vectorise
    while rejected < max_rejections:
        n = min(batch_size, max_rejections - rejected)
        batch_size = min(2 * batch_size, SAMPLING_BATCH)
        batch = 1.0 - rng.random((n, 12))
        cols = _Columns(batch)
        ok = np.ones(n, dtype=bool)
        for c in constraints:
            ok &= np.asarray(c.holds(cols, margin), dtype=bool)
        hits = np.flatnonzero(ok)
        if hits.size:
            params = Parameters.from_array(batch[hits[0]])
            assert params.valid
            return params
        rejected += n
    names = ", ".join(c.name for c in constraints[len(SIMPLEX_CONDITIONS):]) or "(simplex conditions only)"
    raise SamplingError(f"no rate set satisfying {names} after {rejected} rejections")


def sample_initial_point(rng: np.random.Generator, zero: Sequence[int] = ()) -> np.ndarray:
    """Flat Dirichlet point on the face of S^5 where the ``zero`` coordinates vanish."""
    free = [i for i in range(6) if i not in set(zero)]
    x = np.zeros(6)
    x[free] = rng.dirichlet(np.ones(len(free)))
    return x


def predicted_limit(target: Target, params: Parameters, x0) -> PredictedLimit:
    """Limit the target predicts for ``x0``; raises :class:`HypothesisError` if it does not apply."""
    target = Target(target)
    if target.proved:
        return scenario(params, x0, _SCENARIO[target])
    family = _CONJECTURE_FAMILY[target]
    members = feasible_members(params, family)
    if not members:
        raise HypothesisError(f"{target.value}: no feasible {family.value} for these rates")
    return PredictedLimit(target.value, members[0].point, family)


@dataclass(frozen=True)
class ExperimentSpec:
    target: Target
    n_param_draws: int = 100
    n_initial_points_per_draw: int = 10
    seed: int = 0
    variant: str | None = None
    max_iterations: int = MAX_ITERATIONS
    step_tol: float = STEP_TOL
    K: int = CONSECUTIVE_STEPS
    match_tol: float = MATCH_TOL

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        if self.n_param_draws < 1 or self.n_initial_points_per_draw < 1:
            raise ValueError("n_param_draws and n_initial_points_per_draw must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.variant is None:
            object.__setattr__(self, "variant", default_variant(self.target))
        _variant(self.target, self.variant)
        if self.max_iterations < 1 or self.K < 1 or self.step_tol <= 0 or self.match_tol <= 0:
            raise ValueError("iteration settings must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target"] = self.target.value
        return d


@dataclass(frozen=True)
class Counterexample:
    draw: int
    point: int
    params: dict[str, str]
    x0: list[float]
    observed_limit: list[float]
    predicted: dict
    distance: float
    stop_reason: str
    iterations_used: int
    nearest_family: str

    def rerun_config(self, spec: ExperimentSpec) -> dict:
        """Config document accepted by ``plankton-qso simulate --config``."""
        doc = dict(self.params)
        doc.update(x0=list(self.x0), max_iter=spec.max_iterations, step_tol=spec.step_tol)
        return doc

    def rerun_command(self, spec: ExperimentSpec) -> str:
        rates = " ".join(f"--{k} {v}" for k, v in self.params.items())
        x0 = ",".join(repr(v) for v in self.x0)
        return f"plankton-qso simulate {rates} --x0 {x0} --max-iter {spec.max_iterations} --step-tol {spec.step_tol!r}"

    def to_dict(self, spec: ExperimentSpec) -> dict:
        d = asdict(self)
        d["rerun"] = self.rerun_command(spec)
        d["config"] = self.rerun_config(spec)
        return d


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    n_runs: int
    n_converged: int
    n_matched_prediction: int
    n_counterexamples: int
    counterexamples: tuple[Counterexample, ...]
    stop_reasons: dict[str, int]
    nearest_families: dict[str, int]
    n_ties: int
    max_iterations_used: int
    max_matched_distance: float
    wall_time: float = field(default=0.0, compare=False)

    @property
    def match_rate(self) -> float:
        return self.n_matched_prediction / self.n_runs

    @property
    def passed(self) -> bool:
        """Proved targets pass only at a 100% match rate; conjecture reports always pass."""
        return (not self.spec.target.proved) or self.n_matched_prediction == self.n_runs

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "spec": self.spec.to_dict(),
            "n_runs": self.n_runs,
            "n_converged": self.n_converged,
            "n_matched_prediction": self.n_matched_prediction,
            "match_rate": self.match_rate,
            "n_counterexamples": self.n_counterexamples,
            "counterexamples": [c.to_dict(self.spec) for c in self.counterexamples],
            "stop_reasons": dict(sorted(self.stop_reasons.items())),
            "nearest_families": dict(sorted(self.nearest_families.items())),
            "n_ties": self.n_ties,
            "max_iterations_used": self.max_iterations_used,
            "max_matched_distance": self.max_matched_distance,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class _Run:
    point: int
    x0: np.ndarray
    prediction: PredictedLimit
    limit: np.ndarray
    converged: bool
    distance: float
    stop_reason: str
    iterations_used: int
    nearest_family: str
    tie: bool


def _params_rng(seed: int, draw: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, draw)))


def _point_rng(seed: int, draw: int, point: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, draw, point)))


PredictionHook = Callable[[PredictedLimit, Parameters, np.ndarray], PredictedLimit]


def _run_draw(spec: ExperimentSpec, draw: int, hook: PredictionHook | None = None):
    constraints = target_constraints(spec.target, spec.variant)
    zeros = target_zero_coordinates(spec.target, spec.variant)
    params = sample_parameters(constraints, _params_rng(spec.seed, draw))
    runs = []
    for point in range(spec.n_initial_points_per_draw):
        rng = _point_rng(spec.seed, draw, point)
        for _ in range(_MAX_RESAMPLES):
            x0 = sample_initial_point(rng, zeros)
            if residual(params, x0) > FIXED_POINT_RESIDUAL:
                break
        else:
            raise SamplingError(f"draw {draw} point {point}: every sampled initial point was fixed")
        prediction = predicted_limit(spec.target, params, x0)
        if hook is not None:
            prediction = hook(prediction, params, x0)
        _, verdict = iterate(
            params, x0, max_iterations=spec.max_iterations, step_tol=spec.step_tol, K=spec.K, match_tol=spec.match_tol
        )
        runs.append(
            _Run(
                point=point,
                x0=x0,
                prediction=prediction,
                limit=verdict.limit,
                converged=verdict.converged,
                distance=prediction.distance(verdict.limit),
                stop_reason=verdict.stop_reason.value,
                iterations_used=verdict.iterations_used,
                nearest_family=verdict.nearest_family.value,
                tie=bool(verdict.ties),
            )
        )
    return params, runs


def _run_draw_star(args):
    return _run_draw(*args)


def run_experiment(spec: ExperimentSpec, workers: int = 1, prediction_hook: PredictionHook | None = None) -> ExperimentReport:
    """Run ``n_param_draws x n_initial_points_per_draw`` trajectories and tally matches.

    ``prediction_hook`` replaces each prediction before comparison; it
    exists to exercise the failure path.
    """
    started = time.perf_counter()
    tasks = [(spec, draw, prediction_hook) for draw in range(spec.n_param_draws)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_draw_star, tasks))
    else:
        results = [_run_draw_star(t) for t in tasks]

    n_runs = n_converged = n_matched = n_counter = n_ties = 0
    counterexamples: list[Counterexample] = []
    stop_reasons: dict[str, int] = {}
    nearest: dict[str, int] = {}
    max_iter_used = 0
    max_matched = 0.0
    for draw, (params, runs) in enumerate(results):
        for run in runs:
            n_runs += 1
            n_converged += run.converged
            stop_reasons[run.stop_reason] = stop_reasons.get(run.stop_reason, 0) + 1
            nearest[run.nearest_family] = nearest.get(run.nearest_family, 0) + 1
            n_ties += run.tie
            max_iter_used = max(max_iter_used, run.iterations_used)
            if run.converged and run.distance <= spec.match_tol:
                n_matched += 1
                max_matched = max(max_matched, run.distance)
                continue
            n_counter += 1
            if len(counterexamples) < COUNTEREXAMPLE_CAP:
                counterexamples.append(
                    Counterexample(
                        draw=draw,
                        point=run.point,
                        params=params.to_mapping(),
                        x0=[float(v) for v in run.x0],
                        observed_limit=[float(v) for v in run.limit],
                        predicted=run.prediction.to_dict(),
                        distance=float(run.distance),
                        stop_reason=run.stop_reason,
                        iterations_used=run.iterations_used,
                        nearest_family=run.nearest_family,
                    )
                )
    report = ExperimentReport(
        spec=spec,
        n_runs=n_runs,
        n_converged=n_converged,
        n_matched_prediction=n_matched,
        n_counterexamples=n_counter,
        counterexamples=tuple(counterexamples),
        stop_reasons=stop_reasons,
        nearest_families=nearest,
        n_ties=n_ties,
        max_iterations_used=max_iter_used,
        max_matched_distance=max_matched,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        "%s[%s]: %d/%d matched (%d converged) in %.1fs",
        spec.target.value,
        spec.variant,
        n_matched,
        n_runs,
        n_converged,
        report.wall_time,
    )
    return report
