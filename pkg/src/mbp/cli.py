"""Command-line front end: config ingestion, dispatch and JSON documents.

Exit codes: 0 success, 1 verification failure, 2 bad config or invalid
specification, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .diffops import PolyDiffOp, build_bochner_operator, build_tilde_operator, tilde_correction
from .errors import MBPError, NumericalError
from .orthopoly import DEFAULT_N_MAX, monic_sequence
from .polyops import MatrixPolynomial, unipotent_factor
from .verify import SuiteOptions, run_suite
from .weights import (
    DEFAULT_TOLERANCE,
    Family,
    MatrixWeightSpec,
    MomentTable,
    ScalarWeightSpec,
    matrix_moments,
    spec_violations,
    validate_spec,
)

SCHEMA = "mbp/1"
PRECISION_ENV = "MBP_PRECISION"
PRECISIONS = ("f64", "extended")

_CONFIG_KEYS = {"family", "n", "rows", "a", "precision", "tolerance"}
_ROW_KEYS = {
    Family.HERMITE: {"b"},
    Family.LAGUERRE: {"alpha"},
    Family.JACOBI: {"alpha", "beta"},
}


class ConfigError(MBPError, ValueError):
    """The configuration file cannot be turned into a specification."""


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def parse_config(data: dict, env: dict | None = None) -> MatrixWeightSpec:
    """Build a ``MatrixWeightSpec`` from a decoded config object.

    Unknown keys are rejected. ``MBP_PRECISION`` in ``env`` (default
    ``os.environ``) overrides the config's ``precision``.
    """
    env = os.environ if env is None else env
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"family", "rows", "a"} - set(data)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    try:
        family = Family(data["family"])
    except ValueError:
        raise ConfigError(f"unknown family {data['family']!r}") from None
    rows_in, a_in = data["rows"], data["a"]
    if not isinstance(rows_in, list) or not isinstance(a_in, list):
        raise ConfigError("rows and a must be arrays")
    rows = []
    for i, row in enumerate(rows_in):
        if not isinstance(row, dict) or set(row) != _ROW_KEYS[family]:
            raise ConfigError(f"rows[{i}] must have exactly the keys {sorted(_ROW_KEYS[family])}")
        params = {k: _number(v, f"rows[{i}].{k}") for k, v in row.items()}
        rows.append(ScalarWeightSpec(family, **params))
    if "n" in data and data["n"] != len(rows):
        raise ConfigError(f"n = {data['n']!r} but {len(rows)} rows given")
    precision = env.get(PRECISION_ENV) or data.get("precision", "f64")
    if precision not in PRECISIONS:
        raise ConfigError(f"precision must be one of {PRECISIONS}, got {precision!r}")
    tolerance = _number(data.get("tolerance", DEFAULT_TOLERANCE), "tolerance")
    a = [_number(v, f"a[{i}]") for i, v in enumerate(a_in)]
    return MatrixWeightSpec(family, tuple(rows), tuple(a), working_tolerance=tolerance, precision=precision)


def load_config(path, env: dict | None = None) -> MatrixWeightSpec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data, env)


def _clean(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(doc: dict) -> str:
    # Python's float repr is the shortest string that reads back to the same double.
    return json.dumps(_clean(doc), indent=1, allow_nan=False) + "\n"


def _document(kind: str, spec: MatrixWeightSpec, **body) -> dict:
    return {"schema": SCHEMA, "kind": kind, "spec": spec.to_dict(), **body}


def polynomial_to_list(P: MatrixPolynomial) -> list:
    """Coefficient matrices indexed by x-power, each row-major."""
    return P.coeffs.tolist()


def operator_to_list(D: PolyDiffOp) -> list:
    """Coefficients indexed by derivative order, each a polynomial."""
    return [polynomial_to_list(F) for F in D.coeffs]


def moments_document(spec: MatrixWeightSpec, K: int) -> dict:
    M = matrix_moments(spec, K)
    return _document("moments", spec, K=M.K, N=M.N, moments=M.entries)


def read_moments(doc: dict) -> MomentTable:
    """Inverse of the ``moments`` document."""
    if doc.get("schema") != SCHEMA or doc.get("kind") != "moments":
        raise ConfigError("not an mbp/1 moments document")
    return MomentTable(np.array(doc["moments"], dtype=float))


def operator_document(spec: MatrixWeightSpec) -> dict:
    D = build_bochner_operator(spec)
    return _document(
        "operator",
        spec,
        D=operator_to_list(D),
        D_tilde=operator_to_list(build_tilde_operator(spec)),
        K_tilde=tilde_correction(spec),
        A=spec.A,
        T=polynomial_to_list(unipotent_factor(spec.A)),
    )


def orthopoly_document(spec: MatrixWeightSpec, n_max: int) -> dict:
    seq = monic_sequence(matrix_moments(spec, 2 * n_max + 1), n_max)
    return _document(
        "orthopoly",
        spec,
        n_max=n_max,
        P=[polynomial_to_list(p) for p in seq.P],
        H=list(seq.H),
        B=list(seq.B),
        C=list(seq.C[1:]),
        path_discrepancy=seq.path_discrepancy,
    )


def _emit(doc: dict, out) -> None:
    text = dumps(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args, spec) -> int:
    violations = spec_violations(spec)
    doc = _document(
        "validation",
        spec,
        valid=not violations,
        violations=[{"name": type(v).__name__, "message": str(v)} for v in violations],
    )
    _emit(doc, args.out)
    for v in violations:
        print(f"{type(v).__name__}: {v}", file=sys.stderr)
    return 0 if not violations else 2


def _cmd_moments(args, spec) -> int:
    validate_spec(spec)
    _emit(moments_document(spec, args.k), args.out)
    return 0


def _cmd_operator(args, spec) -> int:
    validate_spec(spec)
    _emit(operator_document(spec), args.out)
    return 0


def _cmd_orthopoly(args, spec) -> int:
    validate_spec(spec)
    _emit(orthopoly_document(spec, args.n), args.out)
    return 0


def _cmd_verify(args, spec) -> int:
    options = SuiteOptions(suite=args.suite, tolerance=args.tol, seed=args.seed)
    report = run_suite(spec, options)
    _emit(report.to_dict(), args.out)
    for rec in report.checks:
        if rec.status == "fail":
            print(f"FAIL {rec.name}: {rec.detail}", file=sys.stderr)
    for v in report.violations:
        print(f"{v['name']}: {v['message']}", file=sys.stderr)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", required=True, help="JSON weight configuration")
        p.add_argument("-o", "--out", help="write the document here instead of stdout")
        p.set_defaults(handler=fn)
        return p

    add("validate", _cmd_validate, "check the weight conditions")
    add("moments", _cmd_moments, "matrix moments M_0..M_K").add_argument(
        "-k", type=int, required=True, help="highest moment order"
    )
    add("operator", _cmd_operator, "second-order operator D with D~, K~, A and T")
    add("orthopoly", _cmd_orthopoly, "monic orthogonal polynomials and recurrence data").add_argument(
        "-n", type=int, default=DEFAULT_N_MAX, help="highest degree"
    )
    p = add("verify", _cmd_verify, "run the verification suite")
    p.add_argument("--suite", choices=("all", "fast"), default="all")
    p.add_argument("--tol", type=float, default=SuiteOptions.tolerance, help="tolerance for residual checks")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=SuiteOptions.seed)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        spec = load_config(args.config)
        return args.handler(args, spec)
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (MBPError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
