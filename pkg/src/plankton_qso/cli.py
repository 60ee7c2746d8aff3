"""``plankton-qso``: command-line front end.

Every command accepts rates from a flat JSON config (``--config``) and/or
``--a1 .. --a12`` flags; the command line wins.  Exit status is 0 on
success, 1 on a domain failure (invalid rates, point off the simplex,
failed hypothesis, prediction mismatch) and 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import RATE_NAMES, Parameters, validate_parameters
from .dynamics import CONSECUTIVE_STEPS, MATCH_TOL, MAX_ITERATIONS, STEP_TOL, PredictedLimit, iterate
from .errors import InvalidParametersError, PlanktonQSOError
from .fixed_points import enumerate_fixed_points
from .harness import ExperimentSpec, Target, run_experiment, target_variants
from .stability import classify, vertex_audit

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

CONJECTURE_TARGETS = tuple(t.value for t in Target if not t.proved)

# config key -> argparse dest, for options that may come from either source
_OPTION_KEYS = {
    "x0": "x0",
    "max_iter": "max_iter",
    "step_tol": "step_tol",
    "seed": "seed",
    "target": "target",
    "draws": "draws",
    "points": "points",
    "variant": "variant",
    "format": "format",
    "out": "out",
    "stride": "stride",
    "workers": "workers",
}


class UsageError(Exception):
    """Malformed configuration or arguments (exit status 2)."""


def _load_config(path: str) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}:1:1: config must be a JSON object")
    unknown = sorted(set(doc) - set(RATE_NAMES) - set(_OPTION_KEYS))
    if unknown:
        raise UsageError(f"{path}: unknown key(s): {', '.join(unknown)}")
    return doc


def _merged(args: argparse.Namespace) -> dict[str, Any]:
    """Config document overlaid with every flag given on the command line."""
    doc = _load_config(args.config) if args.config else {}
    for name in RATE_NAMES:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    for key, dest in _OPTION_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            doc[key] = value
    return doc


def _parameters(doc: dict[str, Any]) -> Parameters:
    try:
        return Parameters.from_mapping(doc)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    except InvalidParametersError as exc:
        raise UsageError(str(exc)) from None


def _point(raw) -> np.ndarray:
    if raw is None:
        raise UsageError("an initial point is required (--x0 or config key x0)")
    if isinstance(raw, str):
        parts = [p.strip() for p in raw.split(",")]
    elif isinstance(raw, list):
        parts = raw
    else:
        raise UsageError(f"x0: expected a list or comma-separated string, got {raw!r}")
    try:
        values = [float(p) for p in parts]
    except (TypeError, ValueError):
        raise UsageError(f"x0: cannot parse {raw!r}") from None
    if len(values) != 6:
        raise UsageError(f"x0: expected 6 coordinates, got {len(values)}")
    return np.array(values)


def _number(doc, key, kind, default):
    raw = doc.get(key, default)
    if isinstance(raw, bool):
        raise UsageError(f"{key}: expected a number, got {raw!r}")
    try:
        value = kind(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: cannot parse {raw!r}") from None
    if kind is int and isinstance(raw, float) and raw != value:
        raise UsageError(f"{key}: expected an integer, got {raw!r}")
    return value


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _require_valid(params: Parameters) -> bool:
    report = validate_parameters(params)
    if not report.valid:
        print("invalid rates: violates " + ", ".join(report.violations), file=sys.stderr)
    return report.valid


def cmd_validate(args) -> int:
    doc = _merged(args)
    report = validate_parameters(_parameters(doc))
    sys.stdout.write(_json(report.to_dict()))
    return EXIT_OK if report.valid else EXIT_DOMAIN


def cmd_fixed_points(args) -> int:
    doc = _merged(args)
    params = _parameters(doc)
    if not _require_valid(params):
        return EXIT_DOMAIN
    points = enumerate_fixed_points(params, include_infeasible=args.all)
    _emit(_json({"params": params.to_mapping(), "fixed_points": [fp.to_dict() for fp in points]}), doc.get("out"))
    return EXIT_OK


def cmd_stability(args) -> int:
    doc = _merged(args)
    params = _parameters(doc)
    if not _require_valid(params):
        return EXIT_DOMAIN
    entries = []
    for fp in enumerate_fixed_points(params):
        entry = {"family": fp.family.value}
        entry.update(classify(params, fp).to_dict())
        entries.append(entry)
    result = {"params": params.to_mapping(), "vertices": vertex_audit(params).to_dict(), "fixed_points": entries}
    _emit(_json(result), doc.get("out"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = _merged(args)
    params = _parameters(doc)
    x0 = _point(doc.get("x0"))
    max_iter = _number(doc, "max_iter", int, MAX_ITERATIONS)
    step_tol = _number(doc, "step_tol", float, STEP_TOL)
    stride = doc.get("stride")
    stride = None if stride is None else _number(doc, "stride", int, None)
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "structured"):
        raise UsageError(f"format: expected csv or structured, got {fmt!r}")
    if not _require_valid(params):
        return EXIT_DOMAIN
    trajectory, verdict = iterate(
        params, x0, max_iterations=max_iter, step_tol=step_tol, K=args.k, stride=stride, match_tol=args.match_tol
    )
    out = doc.get("out")
    if fmt == "csv":
        _emit(trajectory.to_csv(), out)
        # keep stdout a clean CSV stream when no output file is given
        (sys.stdout if out else sys.stderr).write(_json(verdict.to_dict()))
    else:
        record = {
            "params": params.to_mapping(),
            "x0": [float(v) for v in trajectory.initial],
            "verdict": verdict.to_dict(),
            "history": {
                "stride": trajectory.stride,
                "n": [int(n) for n in trajectory.history_steps],
                "x": [[float(v) for v in row] for row in trajectory.history],
            },
        }
        _emit(_json(record), out)
    return EXIT_OK


def _wrong_prediction(prediction: PredictedLimit, params, x0) -> PredictedLimit:
    """Replace the prediction with vertex e1, which is never a limit (it is not fixed)."""
    return PredictedLimit("injected", np.eye(6)[0], prediction.family)


def cmd_verify(args) -> int:
    doc = _merged(args)
    target = doc.get("target")
    if target is None:
        raise UsageError("a target is required (--target or config key target)")
    allowed = CONJECTURE_TARGETS if args.command == "conjecture" else tuple(t.value for t in Target)
    if target not in allowed:
        raise UsageError(f"target: expected one of {', '.join(allowed)}, got {target!r}")
    variant = doc.get("variant")
    if variant is not None and variant not in target_variants(Target(target)):
        raise UsageError(f"variant: {target} accepts {', '.join(target_variants(Target(target))) or 'no variants'}")
    try:
        spec = ExperimentSpec(
            target=Target(target),
            n_param_draws=_number(doc, "draws", int, 100),
            n_initial_points_per_draw=_number(doc, "points", int, 10),
            seed=_number(doc, "seed", int, 0),
            variant=variant,
            max_iterations=_number(doc, "max_iter", int, MAX_ITERATIONS),
            step_tol=_number(doc, "step_tol", float, STEP_TOL),
            K=args.k,
            match_tol=args.match_tol,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    hook = _wrong_prediction if args.inject_wrong_prediction else None
    report = run_experiment(spec, workers=_number(doc, "workers", int, 1), prediction_hook=hook)
    _emit(report.to_json(), doc.get("out"))
    print(
        f"{spec.target.value}[{spec.variant}]: {report.n_matched_prediction}/{report.n_runs} matched, "
        f"{report.n_converged} converged, {report.n_counterexamples} counterexample(s)",
        file=sys.stderr,
    )
    for c in report.counterexamples[:3]:
        print("  rerun: " + c.rerun_command(spec), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plankton-qso", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON document with keys a1..a12 and options")
    for name in RATE_NAMES:
        common.add_argument(f"--{name}", metavar="RATE")
    common.add_argument("--out", metavar="PATH", help="write the result here instead of stdout")

    iteration = argparse.ArgumentParser(add_help=False)
    iteration.add_argument("--max-iter", dest="max_iter", type=int, metavar="N")
    iteration.add_argument("--step-tol", dest="step_tol", type=float, metavar="T")
    iteration.add_argument("--k", type=int, default=CONSECUTIVE_STEPS, help="consecutive small steps required")
    iteration.add_argument("--match-tol", dest="match_tol", type=float, default=MATCH_TOL)

    p = sub.add_parser("validate", parents=[common], help="check the rates")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fixed-points", parents=[common], help="enumerate fixed points")
    p.add_argument("--all", action="store_true", help="include infeasible candidates")
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("stability", parents=[common], help="classify the feasible fixed points")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("simulate", parents=[common, iteration], help="iterate from an initial point")
    p.add_argument("--x0", metavar="V1,...,V6")
    p.add_argument("--stride", type=int, help="store every N-th iterate (default: adaptive)")
    p.add_argument("--format", choices=("csv", "structured"))
    p.set_defaults(func=cmd_simulate)

    for name, targets, help_text in (
        ("verify", [t.value for t in Target], "Monte Carlo check of a limit statement"),
        ("conjecture", list(CONJECTURE_TARGETS), "Monte Carlo check of a conjectured limit"),
    ):
        p = sub.add_parser(name, parents=[common, iteration], help=help_text)
        p.add_argument("--target", choices=targets)
        p.add_argument("--variant")
        p.add_argument("--draws", type=int, metavar="N")
        p.add_argument("--points", type=int, metavar="N")
        p.add_argument("--seed", type=int, metavar="S")
        p.add_argument("--workers", type=int, metavar="N")
        p.add_argument("--inject-wrong-prediction", action="store_true", help=argparse.SUPPRESS)
        p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlanktonQSOError as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
