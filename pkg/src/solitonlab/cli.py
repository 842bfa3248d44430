"""Command-line driver: ``solitonlab <command> [--manifest FILE | inline flags]``.

Exit codes: 0 the task ran and every check passed, 2 a check failed,
1 bad input (unreadable or invalid manifest, bad flags, domain errors).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import __version__
from .catalog import CatalogError
from .dsl import EvaluationError, ExpressionError
from .manifest import TASKS, ManifestError, load_manifest, parse_manifest
from .metric import DomainError, MetricError
from .report import EXIT_FAILED, EXIT_INPUT, EXIT_OK, catalog_report, run_manifest, to_csv, to_json, to_text

INPUT_ERRORS = (ManifestError, CatalogError, DomainError, MetricError, ExpressionError, EvaluationError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _key_value(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="solitonlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"solitonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cat = sub.add_parser("catalog", help="list the built-in charts and their expected curvature data")
    cat.add_argument("--format", choices=("json", "text"), default="text")
    cat.add_argument("--out")

    run = sub.add_parser("run", help="run the task named in a manifest")
    run.add_argument("manifest")
    _add_output_flags(run)

    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} task")
        p.add_argument("--manifest")
        p.add_argument("--metric", help="catalog entry name")
        p.add_argument("--param", action="append", type=_key_value, default=[], metavar="K=V")
        p.add_argument("--grid", help='e.g. "(-1,1)^3:5" or "(a,b)x(c,d)x(e,f):n0,n1,n2"')
        p.add_argument("--random-points", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", action="append", type=_key_value, default=[], metavar="NAME=VALUE")
        if task in ("verify-soliton", "fit-soliton"):
            p.add_argument("--kind", choices=("ricci", "yamabe"))
        if task == "verify-soliton":
            p.add_argument("--f", dest="potential", help="potential expression in chart coordinates")
            p.add_argument("--lambda", dest="lam", help='number or "fit"')
        if task == "diagnostics":
            p.add_argument("--step", type=float)
        _add_output_flags(p)
    return parser


def _add_output_flags(p):
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "text"))
    p.add_argument("--csv", help="also write (point, L, residual) rows to this CSV file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identical output)")


def _inline_data(args) -> dict:
    """Manifest mapping assembled from inline flags."""
    if not args.metric:
        raise UsageError("give --manifest or --metric")
    data: dict = {"task": args.command, "metric": {"catalog": args.metric, "params": dict(args.param)}}
    if args.grid:
        data["grid"] = args.grid
    if args.random_points is not None:
        data["random_points"] = args.random_points
    if args.seed is not None:
        data["seed"] = args.seed
    if args.tol:
        data["tolerances"] = dict(args.tol)
    if args.command == "verify-soliton":
        data["soliton"] = {"kind": args.kind or "ricci", "f": args.potential, "lambda": args.lam or "fit"}
    elif args.command == "fit-soliton":
        data["soliton"] = {"kind": args.kind or "ricci", "f": "fit", "lambda": "fit"}
    if getattr(args, "step", None) is not None:
        data["diagnostics"] = {"step": args.step}
    return data


_MANIFEST_ONLY = ("metric", "grid", "random_points", "seed", "kind", "potential", "lam", "step")


def _load(args):
    if args.command == "run" or args.manifest:
        path = args.manifest
        if args.command != "run":
            clashes = [f"--{n.replace('_', '-')}" for n in _MANIFEST_ONLY if getattr(args, n, None) is not None]
            clashes += ["--param"] * bool(args.param) + ["--tol"] * bool(args.tol)
            if clashes:
                raise UsageError(f"{', '.join(clashes)} cannot be combined with --manifest")
        manifest = load_manifest(path)
        if args.command != "run" and manifest.task != args.command:
            raise UsageError(f"manifest task is {manifest.task!r} but the command is {args.command!r}")
    else:
        manifest = parse_manifest(_inline_data(args))
    for flag, value, current in (("--out", args.out, manifest.output_path),
                                 ("--format", args.format, manifest.output_format),
                                 ("--csv", args.csv, manifest.csv_path)):
        if value is not None and current not in (None, value):
            raise UsageError(f"{flag} conflicts with the manifest output block")
    return replace(
        manifest,
        output_path=args.out or manifest.output_path,
        output_format=args.format or manifest.output_format,
        csv_path=args.csv or manifest.csv_path,
    )


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "catalog":
            rep = catalog_report()
            _emit(to_json(rep) if args.format == "json" else to_text(rep), args.out)
            return EXIT_OK
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        manifest = _load(args)
        report, code = run_manifest(manifest, workers=args.workers, timing=args.timing)
    except UsageError as exc:
        print(f"solitonlab: usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except INPUT_ERRORS as exc:
        print(f"solitonlab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except yaml.YAMLError as exc:
        print(f"solitonlab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = to_text(report) if manifest.output_format == "text" else to_json(report)
    try:
        _emit(text, manifest.output_path)
        if manifest.csv_path:
            Path(manifest.csv_path).write_text(to_csv(report))
    except OSError as exc:
        print(f"solitonlab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if code == EXIT_FAILED:
        print("solitonlab: verification failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
