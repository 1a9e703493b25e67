"""
Command-line front end. Every command writes one JSON document to stdout
(or ``--out``) and diagnostics to stderr.

Exit codes: 0 verdict consistent with the theorem, 1 usage or input error,
2 convexity violation found (witness emitted), 3 hypothesis check failed,
4 verification found a disagreement.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .detector import check_local_convexity, construct_witness, verify_theorem, verify_witness
from .errors import CentralMatrixError, DomainError, HypothesisError, WitnessSearchError
from .general import run_chain
from .linalg import DEFAULT_CENTRAL_TOL, hermitian, matrix_from_json
from .scalar import FunctionSpec, Interval, hh_gap_formula, hh_gap_quadrature

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_HYPOTHESIS, EXIT_DISAGREEMENT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_schema() -> dict:
    return json.loads(resources.files("matconvex").joinpath("report.schema.json").read_text())


def parse_matrix(text: str) -> np.ndarray:
    """A JSON file path, inline JSON, ``diag(1,4)``, ``3I_3`` or ``I_2``."""
    text = text.strip()
    path = Path(text)
    if not text.startswith(("{", "[")) and path.is_file():
        text = path.read_text().strip()
    m = re.fullmatch(r"diag\(([^)]*)\)", text)
    if m:
        return hermitian(np.diag([float(v) for v in m.group(1).split(",")]))
    m = re.fullmatch(r"([-+0-9.eE]*)\*?I_?(\d+)", text)
    if m:
        scale = float(m.group(1)) if m.group(1) not in ("", "+", "-") else float(m.group(1) + "1")
        return hermitian(scale * np.eye(int(m.group(2))))
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse matrix {text[:60]!r}: {exc}") from None
    if isinstance(obj, dict):
        return matrix_from_json(obj)
    return matrix_from_json({"entries": obj})


def parse_dims(text: str) -> list[int]:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if m:
        return list(range(int(m.group(1)), int(m.group(2)) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _spec(args) -> FunctionSpec:
    try:
        return FunctionSpec.parse(args.fn)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid --fn {args.fn!r}: {exc}") from None


def _interval(args, spec: FunctionSpec) -> Interval:
    if args.interval is None:
        return spec.domain
    try:
        return Interval.from_json(args.interval)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid --interval {args.interval!r}: {exc}") from None


def _matrix(args) -> np.ndarray:
    if args.matrix is None:
        raise UsageError("--matrix is required for this command")
    return parse_matrix(args.matrix)


def cmd_check(args):
    spec = _spec(args)
    report = check_local_convexity(
        spec, _matrix(args), _interval(args, spec), args.samples, args.seed,
        tol_psd=args.tol_psd, tol_central=args.tol_central,
    )
    if report.verdict == "inconclusive-hypothesis":
        code = EXIT_HYPOTHESIS
    elif report.locally_convex:
        code = EXIT_OK
    else:
        code = EXIT_VIOLATION
    return dict(report.to_json(), function=spec.to_json()), code


def cmd_witness(args):
    spec = _spec(args)
    A = _matrix(args)
    interval = _interval(args, spec)
    w = construct_witness(spec, A, interval, tol_central=args.tol_central)
    check = verify_witness(spec, A, w, interval)
    out = {"report": "witness", "function": spec.to_json(), "interval": interval.to_json()}
    out.update(w.to_json())
    out["verified_form"] = check.form
    out["min_eigenvalue"] = check.min_eigenvalue
    return out, EXIT_VIOLATION


def cmd_verify(args):
    spec = _spec(args)
    window = Interval.from_json(args.window) if args.window else None
    summary = verify_theorem(
        spec, _interval(args, spec), parse_dims(args.dims), args.trials, args.seed,
        n_samples=args.samples, window=window, workers=args.workers,
        tol_psd=args.tol_psd, tol_central=args.tol_central,
    )
    return summary.to_json(), EXIT_DISAGREEMENT if summary.disagreements else EXIT_OK


def cmd_hh_gap(args):
    spec = _spec(args)
    rows = []
    for x in parse_floats(args.x):
        for y in parse_floats(args.y):
            if x == y:
                continue
            formula = hh_gap_formula(spec, x, y)
            quad = hh_gap_quadrature(spec, x, y)
            rows.append({"x": x, "y": y, "formula": formula, "quadrature": quad, "abs_diff": abs(formula - quad)})
    if not rows:
        raise UsageError("hh-gap needs at least one pair with x != y")
    return {"report": "hh-gap", "function": spec.to_json(), "rows": rows}, EXIT_OK


def cmd_chain(args):
    spec = _spec(args)
    run = run_chain(
        spec, _matrix(args), args.steps, interval=_interval(args, spec),
        seed=args.seed, noise=args.noise, decay=args.decay,
    )
    out = dict(run.to_json(), function=spec.to_json())
    return out, EXIT_VIOLATION if run.transferred_at is not None else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matconvex", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--schema", action="store_true", help="print the report JSON schema and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, matrix=False):
        p.add_argument("--fn", required=True, help='function: JSON or shorthand, e.g. power:2.5, exp, poly:t^3')
        p.add_argument("--interval", help="open interval, e.g. '(0,inf)' (default: the function's domain)")
        if matrix:
            p.add_argument("--matrix", help="matrix JSON file, inline JSON, diag(1,4) or 3I_3")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-psd", type=float, default=None, help="PSD tolerance (default 1e-10 (1 + ||f(A)||))")
        p.add_argument("--tol-central", type=float, default=DEFAULT_CENTRAL_TOL)
        p.add_argument("--samples", type=int, default=200, help="random perturbations per sampled check")
        p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("check", help="local convexity verdict at a matrix")
    common(p, matrix=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("witness", help="construct a convexity-violation witness")
    common(p, matrix=True)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("verify", help="randomized check of centrality <=> local convexity")
    common(p)
    p.add_argument("--dims", default="2..8", help="dimensions, e.g. 2,3,4 or 2..8")
    p.add_argument("--trials", type=int, default=25, help="trials per dimension")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--window", help="spectrum sampling window (default [0.5, 4] when it fits)")
    p.set_defaults(func=cmd_verify, samples=50)

    p = sub.add_parser("hh-gap", help="Hermite-Hadamard gap table, closed form vs quadrature")
    common(p)
    p.add_argument("--x", required=True, help="comma-separated x values")
    p.add_argument("--y", required=True, help="comma-separated y values")
    p.set_defaults(func=cmd_hh_gap)

    p = sub.add_parser("chain", help="compression stability chain along approximate eigenvectors")
    common(p, matrix=True)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--decay", type=float, default=0.5)
    p.set_defaults(func=cmd_chain)
    return parser


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        _emit(load_schema(), None)
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    out = getattr(args, "out", None)
    try:
        doc, code = args.func(args)
    except HypothesisError as exc:
        doc, code = {"report": "error", "error": "hypothesis", "message": str(exc)}, EXIT_HYPOTHESIS
    except CentralMatrixError as exc:
        doc, code = {"report": "error", "error": "central", "message": str(exc)}, EXIT_USAGE
    except WitnessSearchError as exc:
        doc, code = {"report": "error", "error": "witness-search", "message": str(exc)}, EXIT_USAGE
    except DomainError as exc:
        doc, code = {"report": "error", "error": "domain", "message": str(exc)}, EXIT_USAGE
    except (UsageError, ValueError, KeyError, OSError) as exc:
        doc, code = {"report": "error", "error": "input", "message": str(exc)}, EXIT_USAGE
    if doc.get("report") == "error":
        print(f"matconvex: {doc['message']}", file=sys.stderr)
    _emit(doc, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
