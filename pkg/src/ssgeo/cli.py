"""Command-line front end.

Three commands drive the library end to end:

``shoot``
    integrate one normal extremal and report its conserved quantities,
    optionally exporting the sampled trajectory as CSV;
``expscan``
    sweep a circle of unit covectors through the local-diffeomorphism test
    of the exponential map and write the verdicts as JSON;
``verify``
    re-run the library's property suites and report measured residuals.

Exit codes: 0 success, 1 bad configuration, 2 integrator blow-up, 3 drift
tolerance violated, 4 verification property failed.  All numeric output is
rendered with 17 significant digits so identical runs produce identical
bytes.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from ssgeo.expmap import calibrated_delta, local_diffeo_test
from ssgeo.field import CometricField, causal_character, load_field
from ssgeo.flow import (
    BlowUpError,
    DriftError,
    energy,
    export_trajectory_csv,
    integrate_extremal,
    natural_parameter,
)
from ssgeo.models import MODEL_IDS, get_model
from ssgeo.verify import DEFAULT_SEED, run_suite

__all__ = ["build_parser", "entrypoint", "main"]

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_BLOW_UP = 2
EXIT_DRIFT = 3
EXIT_PROPERTY_FAILED = 4


class ConfigError(ValueError):
    """Invalid command-line configuration (maps to exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through ConfigError so
    # that status 2 stays reserved for integrator blow-ups.
    def error(self, message: str):  # noqa: A003 - argparse API
        raise ConfigError(message)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssgeo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_field_source(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--model", choices=sorted(MODEL_IDS), help="built-in model id"
        )
        p.add_argument(
            "--field-file", type=Path, help="JSON cometric-field definition"
        )

    shoot = sub.add_parser("shoot", help="integrate one normal extremal", add_help=True)
    add_field_source(shoot)
    shoot.add_argument("--xi", required=True, help="initial covector, comma-separated reals")
    shoot.add_argument("--t-end", type=float, default=1.0, help="integration time (default 1)")
    shoot.add_argument("--step", type=float, default=1e-3, help="fixed step size (default 1e-3)")
    shoot.add_argument(
        "--adaptive-tol", type=float, default=None,
        help="switch to the adaptive integrator with this local tolerance",
    )
    shoot.add_argument("--out", type=Path, default=None, help="write trajectory CSV here")

    expscan = sub.add_parser(
        "expscan", help="scan unit covectors through the local-diffeomorphism test"
    )
    add_field_source(expscan)
    expscan.add_argument(
        "--resolution", type=int, default=100,
        help="number of grid directions on the unit circle (default 100)",
    )
    expscan.add_argument("--out", type=Path, default=None, help="write scan JSON here")

    verify = sub.add_parser("verify", help="run the property-verification suites")
    verify.add_argument(
        "--suite", default="all",
        help="tensor | christoffel | flow | expmap | models | all (default all)",
    )
    verify.add_argument(
        "--seed", type=int, default=DEFAULT_SEED,
        help=f"seed for the randomized properties (default {DEFAULT_SEED})",
    )
    return parser


def _resolve_field(args: argparse.Namespace) -> CometricField:
    if (args.model is None) == (args.field_file is None):
        raise ConfigError("exactly one of --model or --field-file is required")
    if args.model is not None:
        return get_model(args.model)
    try:
        return load_field(args.field_file)
    except OSError as exc:
        raise ConfigError(f"cannot read field file: {exc}") from exc


def _parse_covector(text: str, dim: int) -> np.ndarray:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--xi must be comma-separated reals: {exc}") from exc
    if len(values) != dim:
        raise ConfigError(f"--xi has {len(values)} components, field needs {dim}")
    return np.asarray(values)


def cmd_shoot(args: argparse.Namespace) -> int:
    field = _resolve_field(args)
    xi0 = _parse_covector(args.xi, field.dim)
    if not (args.t_end > 0.0 and np.isfinite(args.t_end)):
        raise ConfigError(f"--t-end must be positive and finite, got {args.t_end}")
    if not (args.step > 0.0):
        raise ConfigError(f"--step must be positive, got {args.step}")
    if args.adaptive_tol is not None and not (args.adaptive_tol > 0.0):
        raise ConfigError(f"--adaptive-tol must be positive, got {args.adaptive_tol}")
    x0 = np.zeros(field.dim)
    trajectory = integrate_extremal(
        field, x0, xi0, args.t_end, step=args.step, adaptive_tol=args.adaptive_tol
    )
    if args.out is not None:
        export_trajectory_csv(trajectory, args.out)
    print(f"H0 = {_fmt(trajectory.h0)}")
    print(f"causal class = {trajectory.causal.kind.value}")
    print(f"natural parameter = {_fmt(natural_parameter(field, trajectory))}")
    print(f"energy = {_fmt(energy(field, trajectory))}")
    if args.out is not None:
        print(f"wrote {len(trajectory)} samples to {args.out}")
    return EXIT_OK


def _scan_directions(dim: int, resolution: int) -> np.ndarray:
    # Half-offset angles hit the diagonal directions exactly when the
    # resolution is divisible by 4 and avoid duplicating the axes.
    angles = 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
    directions = np.zeros((resolution, dim))
    directions[:, 0] = np.cos(angles)
    directions[:, 1] = np.sin(angles)
    return directions


def cmd_expscan(args: argparse.Namespace) -> int:
    field = _resolve_field(args)
    if args.resolution <= 0:
        raise ConfigError(f"--resolution must be positive, got {args.resolution}")
    if field.dim - field.rank < 1:
        raise ConfigError("expscan needs a field with a nontrivial kernel")
    origin = np.zeros(field.dim)
    rows = []
    holds = 0
    for u in _scan_directions(field.dim, args.resolution):
        det, verdict = local_diffeo_test(field, origin, u)
        scalar = causal_character(field, origin, u).scalar
        holds += int(verdict)
        entries = ", ".join(_fmt(component) for component in u)
        rows.append(
            f'{{"u": [{entries}], "cometric_scalar": {_fmt(scalar)}, '
            f'"detW": {_fmt(det)}, "local_diffeo": {"true" if verdict else "false"}}}'
        )
    payload = "[\n" + ",\n".join(rows) + "\n]\n"
    if args.out is not None:
        args.out.write_text(payload)
    else:
        sys.stdout.write(payload)
    delta = calibrated_delta(field, origin)
    print(
        f"local diffeomorphism holds on {holds}/{args.resolution} directions; "
        f"calibrated delta-hat = {_fmt(delta)}"
    )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        pairs = run_suite(args.suite, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    failures = 0
    for suite, result in pairs:
        status = "PASS" if result.passed else "FAIL"
        failures += 0 if result.passed else 1
        print(
            f"{suite}:{result.name}: {_fmt(result.measured)} "
            f"{result.comparison} {_fmt(result.bound)} {status}"
        )
    print(f"{len(pairs) - failures}/{len(pairs)} properties passed")
    return EXIT_PROPERTY_FAILED if failures else EXIT_OK


_COMMANDS = {"shoot": cmd_shoot, "expscan": cmd_expscan, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required (shoot, expscan, verify)")
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        # ConfigError and the field validation errors all derive from
        # ValueError; they share the bad-configuration exit code.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOW_UP
    except DriftError as exc:
        print(f"drift: {exc}", file=sys.stderr)
        return EXIT_DRIFT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
