"""
Command-line verbs: scalar-curvature, project, flow, verify-theorem, selftest.

Exit codes: 0 success, 1 numerical failure (report still written),
2 malformed input. Artifacts go to files; stdout only carries selftest lines.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, TextIO, Tuple

import numpy as np
from pydantic import ValidationError

from ..config import config
from ..constants import ExitCodes
from ..curvature.abreu import curvature_profile
from ..exceptions import (
    NodeError,
    ProjectionError,
    RejectedInputError,
    SpecFileError,
    ToricError,
)
from ..flow.calabi_flow import FlowParams, run
from ..flow.experiment import theorem_experiment
from ..geometry.grid import build_grid
from ..geometry.polytope import DelzantPolytope, PolytopeFactory
from ..potential.potential import SymplecticPotential, guillemin_potential
from ..separable.projection import (
    l2_distance,
    minimizer_check,
    project_separable,
    sample_competitors,
    separability_defect,
)
from ..utils.perturbations import available_kinds, build_perturbation
from ..utils.specs import (
    PolytopeSpec,
    describe_validation_error,
    load_flow_config,
    load_model,
    load_potential,
    smooth_part_to_dict,
)
from ..utils.writers import (
    correction_path,
    read_smooth_csv,
    series_path,
    write_curvature_csv,
    write_json,
    write_series_csv,
    write_smooth_csv,
)

logger = logging.getLogger(__name__)

VERBS = ["scalar-curvature", "project", "flow", "verify-theorem", "selftest"]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting."""

    def error(self, message: str):
        raise SpecFileError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toric", description="Toric Kähler toolkit: Abreu curvature, separable projection, Calabi flow")
    parser.add_argument("verb", choices=VERBS)
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--builtin", help=f"built-in polytope: {', '.join(PolytopeFactory.get_available_builtins())}")
    source.add_argument("--polytope", help="polytope spec JSON file")
    parser.add_argument("--potential", help="potential JSON file (polytope, grid_n, values)")
    parser.add_argument("--grid", type=int, help=f"cells per axis (default {config.default_grid_n})")
    parser.add_argument("--config", help="flow config JSON file")
    parser.add_argument("--amplitude", type=float, help="perturbation amplitude (default 0.01)")
    parser.add_argument("--kind", choices=available_kinds(), help="perturbation kind (default polynomial)")
    parser.add_argument("--out", help="output file")
    parser.add_argument("--series", help="flow series CSV (default: <out>_series.csv)")
    return parser


def _polytope(args: argparse.Namespace, default: Optional[str] = None) -> Tuple[Dict[str, Any], DelzantPolytope]:
    """Polytope from --polytope or --builtin, with its spec for the report."""
    if args.polytope:
        spec = load_model(args.polytope, PolytopeSpec)
    elif args.builtin or default:
        spec = PolytopeSpec(builtin=args.builtin or default)
    else:
        raise SpecFileError("one of --builtin or --polytope is required")
    return spec.model_dump(exclude_none=True), spec.build()


def _require_out(args: argparse.Namespace) -> Path:
    if not args.out:
        raise SpecFileError(f"{args.verb} needs --out")
    return Path(args.out)


def _grid_n(args: argparse.Namespace, fallback: Optional[Any] = None) -> Any:
    if args.grid is not None:
        return args.grid
    return fallback if fallback is not None else config.default_grid_n


def _perturbed(polytope: DelzantPolytope, grid_n: Any, kind: str, amplitude: float, coeffs=None) -> SymplecticPotential:
    grid = build_grid(polytope, grid_n)
    perturbation = build_perturbation(grid, kind, amplitude, coeffs)
    return guillemin_potential(polytope, grid).with_correction(perturbation.values)


def _load_potential(args: argparse.Namespace) -> SymplecticPotential:
    """--potential as a JSON potential file, or as a correction CSV on --builtin/--polytope and --grid."""
    path = Path(args.potential)
    if path.suffix.lower() != ".csv":
        return load_potential(path)
    _, polytope = _polytope(args)
    grid = build_grid(polytope, _grid_n(args))
    try:
        smooth = read_smooth_csv(path, grid)
    except (ValueError, IndexError) as e:
        raise SpecFileError(f"Cannot read {path}: {e}") from e
    return guillemin_potential(polytope, grid).with_correction(smooth.values)


def _effective_config(**entries: Any) -> Dict[str, Any]:
    return {
        "default_grid_n": config.default_grid_n,
        "log_level": config.log_level,
        **entries,
    }


def cmd_scalar_curvature(args: argparse.Namespace) -> int:
    out = _require_out(args)
    if args.potential:
        u = _load_potential(args)
    else:
        _, polytope = _polytope(args)
        u = guillemin_potential(polytope, build_grid(polytope, _grid_n(args)))
    profile = curvature_profile(u)
    write_curvature_csv(out, u.grid, profile)
    logger.info("Calabi energy %.6e on %d nodes", profile.energy, u.grid.size)
    return ExitCodes.SUCCESS


def cmd_project(args: argparse.Namespace) -> int:
    out = _require_out(args)
    if args.potential:
        u = _load_potential(args)
        source: Dict[str, Any] = {"potential": args.potential}
    else:
        spec, polytope = _polytope(args, default="square")
        kind, amplitude = args.kind or "polynomial", args.amplitude if args.amplitude is not None else 0.01
        u = _perturbed(polytope, _grid_n(args), kind, amplitude)
        source = {"polytope": spec, "grid_n": _grid_n(args), "perturbation": {"kind": kind, "amplitude": amplitude}}

    projection = project_separable(u)
    report = {
        **smooth_part_to_dict(projection.v.smooth),
        "parts": {
            "first": projection.parts.first.tolist(),
            "second": projection.parts.second.tolist(),
        },
        "defect": separability_defect(u.smooth),
        "distance": l2_distance(u, projection.v),
        "config": _effective_config(**source),
    }
    write_json(out, report)
    write_smooth_csv(correction_path(out), projection.v.smooth)
    return ExitCodes.SUCCESS


def cmd_flow(args: argparse.Namespace) -> int:
    if not args.config:
        raise SpecFileError("flow needs --config")
    flow_config = load_flow_config(args.config)
    out = Path(args.out) if args.out else Path(args.config).with_name("flow_report.json")

    polytope = flow_config.polytope.build()
    grid_n = _grid_n(args, flow_config.grid_n)
    perturbation = flow_config.perturbation.model_copy(update={
        key: value for key, value in (("kind", args.kind), ("amplitude", args.amplitude)) if value is not None
    })
    u0 = _perturbed(polytope, grid_n, perturbation.kind, perturbation.amplitude, perturbation.coeffs)

    reference = None
    if flow_config.reference:
        reference_path = Path(args.config).parent / flow_config.reference
        reference = load_potential(reference_path)

    params = FlowParams.from_config(flow_config.params)
    report = run(u0, reference=reference, params=params)

    write_series_csv(Path(args.series) if args.series else series_path(out), report)
    write_json(out, {
        **report.summary(),
        "config": _effective_config(
            polytope=flow_config.polytope.model_dump(exclude_none=True),
            grid_n=grid_n,
            perturbation=perturbation.model_dump(),
            reference=flow_config.reference,
        ),
    })
    return ExitCodes.NUMERICAL_FAILURE if report.failed else ExitCodes.SUCCESS


def cmd_verify_theorem(args: argparse.Namespace) -> int:
    out = _require_out(args)
    overrides: Dict[str, Any] = {}
    kind, amplitude, coeffs = "polynomial", 0.01, None
    if args.config:
        flow_config = load_flow_config(args.config)
        spec, polytope = flow_config.polytope.model_dump(exclude_none=True), flow_config.polytope.build()
        grid_n = _grid_n(args, flow_config.grid_n)
        kind, amplitude, coeffs = flow_config.perturbation.kind, flow_config.perturbation.amplitude, flow_config.perturbation.coeffs
        overrides = dict(flow_config.params)
    else:
        spec, polytope = _polytope(args, default="square")
        grid_n = _grid_n(args)
    kind = args.kind or kind
    amplitude = args.amplitude if args.amplitude is not None else amplitude

    if not polytope.is_product:
        raise RejectedInputError("verify-theorem needs a product polytope")
    grid = build_grid(polytope, grid_n)
    perturbation = build_perturbation(grid, kind, amplitude, coeffs)
    result = theorem_experiment(polytope.factor(1), polytope.factor(2), perturbation, FlowParams.from_config(overrides))

    write_series_csv(Path(args.series) if args.series else series_path(out), result.report)
    write_json(out, {
        **result.summary(),
        "config": _effective_config(
            polytope=spec,
            grid_n=grid_n,
            perturbation={"kind": kind, "amplitude": amplitude, "coeffs": coeffs},
        ),
    })
    return ExitCodes.SUCCESS if result.verdict else ExitCodes.NUMERICAL_FAILURE


def _check_constant_curvature(name: str, expected: float, n: int = 16) -> Tuple[bool, str]:
    polytope = PolytopeFactory.create(name)
    profile = curvature_profile(guillemin_potential(polytope, build_grid(polytope, n)))
    error = float(np.max(np.abs(profile.scalar.values - expected)))
    return error <= 1e-9, f"max |S - {expected:g}| = {error:.3e}"


def _perturbed_square(n: int = 16) -> SymplecticPotential:
    return _perturbed(PolytopeFactory.create("square"), n, "polynomial", 0.01).mean_free()


def _check_idempotence() -> Tuple[bool, str]:
    u = _perturbed_square()
    once = project_separable(u).v
    twice = project_separable(once).v
    error = float(np.max(np.abs(twice.correction - once.correction)))
    return error <= 1e-12, f"max |P(P(u)) - P(u)| = {error:.3e}"


def _check_minimizer() -> Tuple[bool, str]:
    u = _perturbed_square()
    rng = np.random.default_rng(config.selftest_seed)
    check = minimizer_check(u, sample_competitors(u, 10, rng))
    ok = check.holds and check.max_pythagoras_residual <= 1e-10
    return ok, f"dist(u, v) = {check.distance_to_projection:.6e}, pythagoras residual {check.max_pythagoras_residual:.3e}"


SELFTEST_CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("scalar_curvature interval", lambda: _check_constant_curvature("interval", 4.0)),
    ("scalar_curvature simplex2", lambda: _check_constant_curvature("simplex2", 12.0)),
    ("scalar_curvature square", lambda: _check_constant_curvature("square", 8.0)),
    ("projection idempotence", _check_idempotence),
    ("minimizer inequality", _check_minimizer),
]


def selftest(stream: Optional[TextIO] = None) -> int:
    """Closed-form oracle checks; one PASS/FAIL line per check."""
    stream = stream if stream is not None else sys.stdout
    failed = []
    for name, check in SELFTEST_CHECKS:
        try:
            ok, detail = check()
        except ToricError as e:
            ok, detail = False, str(e)
        stream.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
        if not ok:
            failed.append(name)
    if failed:
        logger.error("Selftest failed: %s", ", ".join(failed))
        return ExitCodes.NUMERICAL_FAILURE
    return ExitCodes.SUCCESS


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "scalar-curvature": cmd_scalar_curvature,
    "project": cmd_project,
    "flow": cmd_flow,
    "verify-theorem": cmd_verify_theorem,
    "selftest": lambda args: selftest(),
}


def _fail(code: int, message: str) -> int:
    logger.error(message)
    print(f"error: {message}", file=sys.stderr)
    return code


def run_command(argv: List[str]) -> int:
    """Parse argv, run one verb and map failures to exit codes."""
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.verb](args)
    except (NodeError, ProjectionError) as e:
        return _fail(ExitCodes.NUMERICAL_FAILURE, str(e))
    except ToricError as e:
        return _fail(ExitCodes.INPUT_ERROR, str(e))
    except ValidationError as e:
        return _fail(ExitCodes.INPUT_ERROR, f"invalid value: {describe_validation_error(e)}")
    except OSError as e:
        return _fail(ExitCodes.INPUT_ERROR, str(e))
    except SystemExit as e:
        # --help
        return int(e.code or 0)
