"""Expression parser, problem files, and the command-line driver.

Grammar (rationals only, no general division)::

    expr     := term (('+'|'-') term)*
    term     := factor ('*' factor)*
    factor   := atom ('^' nat)?
    atom     := rational | identifier | '(' expr ')' | '-' atom
    rational := integer ('/' positive-integer)?

Parsing evaluates directly in the chart ring, so Koszul normalization and
truncation happen on the fly; terms pushed past the truncation window are
dropped and reported as warnings.

Exit codes: 0 success (or a true answer), 1 mathematically negative answer
or solver precondition failure (see ``error_kind`` in the report),
2 malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .distribution import Distribution, is_involutive, rank_of
from .errors import (
    ExpressionSyntaxError,
    ProblemFormatError,
    UnknownCoordinateError,
    ZnError,
)
from .fields import CoordinateChange, VectorField, bracket, pushforward
from .frobenius import (
    FrobeniusCertificate,
    adapted_coordinates,
    straighten_deg0,
    straighten_nonzero,
    verify_adapted,
)
from .grading import DegreeVector
from .series import (ChartSpec, GradedSeries, collect_truncation_drops,
                     is_boundary_monomial)


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str       # "int", "ident", or the operator character itself
    text: str
    offset: int


def _line_col(src: str, offset: int) -> tuple[int, int]:
    line = src.count("\n", 0, offset) + 1
    last_nl = src.rfind("\n", 0, offset)
    column = offset - (last_nl + 1)
    return line, column


def _syntax_error(src: str, offset: int, message: str) -> ExpressionSyntaxError:
    line, column = _line_col(src, offset)
    return ExpressionSyntaxError(f"{message} at offset {offset}",
                                 offset, line, column)


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit():
            start = i
            while i < n and src[i].isdigit():
                i += 1
            tokens.append(_Token("int", src[start:i], start))
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            tokens.append(_Token("ident", src[start:i], start))
            continue
        if c in "+-*^/()":
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        raise _syntax_error(src, i, f"unexpected character {c!r}")
    return tokens


# ---------------------------------------------------------------------------
# recursive-descent parser, evaluating straight into the chart ring
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, src: str, chart: ChartSpec):
        self.src = src
        self.chart = chart
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Optional[_Token]:
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def error(self, message: str) -> ExpressionSyntaxError:
        tok = self.peek()
        offset = tok.offset if tok is not None else len(self.src)
        return _syntax_error(self.src, offset, message)

    def parse(self) -> GradedSeries:
        value = self.expr()
        if self.peek() is not None:
            raise self.error(f"unexpected token {self.peek().text!r}")
        return value

    def expr(self) -> GradedSeries:
        value = self.term()
        while True:
            tok = self.peek()
            if tok is None or tok.kind not in ("+", "-"):
                return value
            self.next()
            rhs = self.term()
            value = value + rhs if tok.kind == "+" else value - rhs

    def term(self) -> GradedSeries:
        value = self.factor()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "*":
                return value
            self.next()
            value = value * self.factor()

    def factor(self) -> GradedSeries:
        value = self.atom()
        tok = self.peek()
        if tok is not None and tok.kind == "^":
            self.next()
            exp = self.peek()
            if exp is None or exp.kind != "int":
                raise self.error("expected a natural number after '^'")
            self.next()
            value = value ** int(exp.text)
        return value

    def atom(self) -> GradedSeries:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of expression")
        if tok.kind == "-":
            self.next()
            return -self.atom()
        if tok.kind == "int":
            self.next()
            numerator = int(tok.text)
            nxt = self.peek()
            if nxt is not None and nxt.kind == "/":
                self.next()
                den = self.peek()
                if den is None or den.kind != "int":
                    raise self.error("expected a positive integer denominator")
                if int(den.text) == 0:
                    raise self.error("denominator must be positive")
                self.next()
                return self.chart.constant(Fraction(numerator, int(den.text)))
            return self.chart.constant(numerator)
        if tok.kind == "ident":
            self.next()
            try:
                return self.chart.coordinate(tok.text)
            except UnknownCoordinateError:
                raise _syntax_error(
                    self.src, tok.offset,
                    f"unknown identifier {tok.text!r}") from None
        if tok.kind == "(":
            self.next()
            value = self.expr()
            closing = self.peek()
            if closing is None or closing.kind != ")":
                raise self.error("expected ')'")
            self.next()
            return value
        raise self.error(f"unexpected token {tok.text!r}")


def parse_expression(src: str, chart: ChartSpec,
                     warnings: Optional[list[str]] = None) -> GradedSeries:
    """Parse an expression into a canonical series on the chart.

    Terms beyond the truncation window are dropped; a note per dropped
    monomial is appended to ``warnings`` when a list is supplied.
    """
    with collect_truncation_drops() as drops:
        value = _Parser(src, chart).parse()
    if warnings is not None:
        for mon, coeff in drops:
            warnings.append(
                f"dropped {coeff}*{mon.label(chart)}: beyond truncation "
                f"(j_order={chart.j_order}, base_order={chart.base_order})")
    return value


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------

TASKS = ("bracket", "rank", "involutive", "straighten", "frobenius", "verify")


@dataclass
class ProblemSpec:
    chart: ChartSpec
    fields: dict[str, VectorField]
    field_order: tuple[str, ...]
    task: str
    args: dict
    warnings: list[str] = field(default_factory=list)


def _require(data: dict, key: str, kind, where: str):
    if key not in data:
        raise ProblemFormatError(f"missing {key!r} in {where}")
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise ProblemFormatError(f"{where}.{key} has the wrong type")
    return value


def _parse_degree(data, n: int, where: str) -> DegreeVector:
    if (not isinstance(data, list) or len(data) != n
            or any(b not in (0, 1) for b in data)):
        raise ProblemFormatError(
            f"{where} must be a list of {n} bits")
    return DegreeVector(tuple(int(b) for b in data))


def load_problem(data: dict,
                 task_override: Optional[str] = None,
                 j_order: Optional[int] = None,
                 base_order: Optional[int] = None) -> ProblemSpec:
    if not isinstance(data, dict):
        raise ProblemFormatError("problem must be a JSON object")
    n = _require(data, "n", int, "problem")
    trunc = data.get("truncation", {})
    if not isinstance(trunc, dict):
        raise ProblemFormatError("problem.truncation must be an object")
    j = j_order if j_order is not None else trunc.get("j_order", 4)
    b = base_order if base_order is not None else trunc.get("base_order", 6)
    if not isinstance(j, int) or not isinstance(b, int) or j < 1 or b < 1:
        raise ProblemFormatError("truncation orders must be positive integers")

    coords_data = _require(data, "coordinates", list, "problem")
    coords = []
    for i, c in enumerate(coords_data):
        where = f"coordinates[{i}]"
        if not isinstance(c, dict):
            raise ProblemFormatError(f"{where} must be an object")
        name = _require(c, "name", str, where)
        if not name.isidentifier():
            raise ProblemFormatError(f"{where}.name is not a valid identifier")
        deg = _parse_degree(_require(c, "degree", list, where), n, f"{where}.degree")
        coords.append((name, deg))
    try:
        chart = ChartSpec(n=n, coordinates=tuple(coords), j_order=j, base_order=b)
    except ZnError as exc:
        raise ProblemFormatError(str(exc)) from exc

    warnings: list[str] = []
    fields: dict[str, VectorField] = {}
    order: list[str] = []
    for i, f in enumerate(data.get("fields", [])):
        where = f"fields[{i}]"
        if not isinstance(f, dict):
            raise ProblemFormatError(f"{where} must be an object")
        name = _require(f, "name", str, where)
        if name in fields:
            raise ProblemFormatError(f"duplicate field name {name!r}")
        coeffs_data = _require(f, "coefficients", dict, where)
        coeffs: dict[str, GradedSeries] = {}
        for coord, expr in coeffs_data.items():
            if coord not in chart.names:
                raise ProblemFormatError(
                    f"{where} refers to unknown coordinate {coord!r}")
            if not isinstance(expr, str):
                raise ProblemFormatError(f"{where}.coefficients must map to strings")
            series = parse_expression(expr, chart, warnings)
            if not series.is_zero:
                coeffs[coord] = series
        if "degree" in f:
            degree = _parse_degree(f["degree"], n, f"{where}.degree")
        else:
            degree = _infer_field_degree(chart, coeffs, where)
        try:
            fields[name] = VectorField(chart, degree, coeffs)
        except ZnError as exc:
            raise ProblemFormatError(f"{where}: {exc}") from exc
        order.append(name)

    task = task_override if task_override is not None else data.get("task")
    if task not in TASKS:
        raise ProblemFormatError(
            f"task must be one of {', '.join(TASKS)}; got {task!r}")
    args = data.get("args", {})
    if not isinstance(args, dict):
        raise ProblemFormatError("problem.args must be an object")
    return ProblemSpec(chart=chart, fields=fields, field_order=tuple(order),
                       task=task, args=args, warnings=warnings)


def _infer_field_degree(chart: ChartSpec, coeffs: dict[str, GradedSeries],
                        where: str) -> DegreeVector:
    for coord, series in coeffs.items():
        if series.degree is None:
            raise ProblemFormatError(
                f"{where}: coefficient on {coord!r} is inhomogeneous; "
                "declare the field degree explicitly")
        return series.degree + chart.degree_of(coord)
    raise ProblemFormatError(
        f"{where}: zero field needs an explicit degree")


def _selected_fields(spec: ProblemSpec, key: str = "generators") -> list[VectorField]:
    names = spec.args.get(key, list(spec.field_order))
    if not isinstance(names, list) or not all(isinstance(x, str) for x in names):
        raise ProblemFormatError(f"args.{key} must be a list of field names")
    out = []
    for name in names:
        if name not in spec.fields:
            raise ProblemFormatError(f"unknown field {name!r} in args.{key}")
        out.append(spec.fields[name])
    return out


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def _witness_json(result) -> dict:
    out: dict = {}
    if result.witness_pair is not None:
        out["pair"] = list(result.witness_pair)
    if result.witness_bracket is not None:
        out["bracket"] = result.witness_bracket.to_json_dict()
    if result.obstruction is not None:
        entry = {
            "coordinate": result.obstruction.obstruction_coordinate,
            "order": result.obstruction.residual_order,
        }
        residual = result.obstruction.residual
        if residual is not None and entry["coordinate"] is not None:
            entry["residual"] = residual.coefficient(
                entry["coordinate"]).to_json_map()
        out["obstruction"] = entry
    return out


def _run_bracket(spec: ProblemSpec) -> tuple[dict, int]:
    names = spec.args.get("fields")
    if names is None:
        names = list(spec.field_order[:2])
    if (not isinstance(names, list) or len(names) != 2
            or any(n not in spec.fields for n in names)):
        raise ProblemFormatError("bracket needs args.fields = [left, right]")
    result = bracket(spec.fields[names[0]], spec.fields[names[1]])
    return {"task": "bracket", "result": result.to_json_dict()}, 0


def _run_rank(spec: ProblemSpec) -> tuple[dict, int]:
    D = Distribution(spec.chart, _selected_fields(spec))
    return {"task": "rank", "rank": rank_of(D).to_json()}, 0


def _run_involutive(spec: ProblemSpec) -> tuple[dict, int]:
    D = Distribution(spec.chart, _selected_fields(spec))
    result = is_involutive(D)
    report: dict = {"task": "involutive", "involutive": result.involutive}
    if result.involutive:
        return report, 0
    report["witness"] = _witness_json(result)
    return report, 1


def _run_straighten(spec: ProblemSpec) -> tuple[dict, int]:
    name = spec.args.get("field")
    if name is None and len(spec.field_order) == 1:
        name = spec.field_order[0]
    if not isinstance(name, str) or name not in spec.fields:
        raise ProblemFormatError("straighten needs args.field")
    X = spec.fields[name]
    if X.degree.is_zero:
        change = straighten_deg0(X)
    else:
        change = straighten_nonzero(X)
    straight = pushforward(change, X)
    pivot = next(
        n for n in spec.chart.names
        if straight.coefficient(n).constant_term
    )
    report = {"task": "straighten", "field": name, "pivot": pivot}
    report.update(change.to_json_dict())
    return report, 0


def _run_frobenius(spec: ProblemSpec) -> tuple[dict, int]:
    generators = _selected_fields(spec)
    D = Distribution(spec.chart, generators)
    cert = adapted_coordinates(D)
    report = {"task": "frobenius", "verified": True}
    report.update(cert.to_json_dict())
    return report, 0


def _load_certificate(spec: ProblemSpec, path: str
                      ) -> tuple[FrobeniusCertificate, bool]:
    """Rebuild a certificate from its JSON form.

    Only the forward images are trusted: the inverse is re-derived and the
    stored one cross-checked against it (a mismatch beyond the truncation
    boundary fails verification rather than the parse).  Syntactic
    problems stay format errors.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFormatError(f"cannot read certificate {path!r}: {exc}") from exc
    chart = spec.chart
    adapted = _require(data, "adapted", list, "certificate")
    if not all(isinstance(n, str) and n in chart.names for n in adapted):
        raise ProblemFormatError("certificate lists unknown adapted coordinates")
    images = {
        name: parse_expression(expr, chart)
        for name, expr in _require(data, "change", dict, "certificate").items()
    }
    inverse_stored = {
        name: parse_expression(expr, chart)
        for name, expr in _require(data, "inverse", dict, "certificate").items()
    }
    change = CoordinateChange.make(chart, chart, images)
    inverse_ok = set(inverse_stored) == set(chart.names)
    if inverse_ok:
        for name in chart.names:
            diff = inverse_stored[name] - change.inverse_images[name]
            if any(not is_boundary_monomial(m, chart) for m in diff.terms):
                inverse_ok = False
                break
    residuals = tuple(
        (int(k), int(v))
        for k, v in data.get("residuals", {}).items()
    )
    cert = FrobeniusCertificate(change=change, adapted=tuple(adapted),
                                residuals=residuals, steps=())
    return cert, inverse_ok


def _run_verify(spec: ProblemSpec) -> tuple[dict, int]:
    path = spec.args.get("certificate")
    if not isinstance(path, str):
        raise ProblemFormatError("verify needs args.certificate = <path>")
    cert, inverse_ok = _load_certificate(spec, path)
    D = Distribution(spec.chart, _selected_fields(spec))
    report = verify_adapted(D, cert)
    body = {"task": "verify"}
    body.update(report.to_json_dict())
    body["inverse_consistent"] = inverse_ok
    body["ok"] = report.ok and inverse_ok
    return body, 0 if body["ok"] else 1


def run(spec: ProblemSpec) -> tuple[dict, int]:
    """Execute the task; returns the JSON report and the exit code."""
    handlers = {
        "bracket": _run_bracket,
        "rank": _run_rank,
        "involutive": _run_involutive,
        "straighten": _run_straighten,
        "frobenius": _run_frobenius,
        "verify": _run_verify,
    }
    try:
        report, code = handlers[spec.task](spec)
    except (ProblemFormatError, ExpressionSyntaxError):
        raise
    except ZnError as exc:
        report = {"task": spec.task, "error_kind": exc.kind, "error": str(exc)}
        witness = getattr(exc, "witness", None)
        if witness is not None:
            report["witness"] = _witness_json(witness)
        pair = getattr(exc, "pair", None)
        if pair is not None:
            report["witness"] = {"pair": list(pair)}
        code = 1
    if spec.warnings:
        report["warnings"] = list(spec.warnings)
    return report, code


# ---------------------------------------------------------------------------
# CLI driver
# ---------------------------------------------------------------------------

def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="znfrob",
        description="Graded-chart kernel: brackets, ranks, involutivity, "
                    "straightening, and certificate verification.")
    parser.add_argument("--input", required=True,
                        help="problem JSON file ('-' for stdin)")
    parser.add_argument("--task", choices=TASKS,
                        help="override the task in the problem file")
    parser.add_argument("--j-order", type=int, dest="j_order",
                        help="override the J-adic truncation order")
    parser.add_argument("--base-order", type=int, dest="base_order",
                        help="override the base truncation order")
    parser.add_argument("--verify", metavar="CERTIFICATE",
                        help="re-check an emitted certificate "
                             "(sets task=verify)")
    opts = parser.parse_args(argv)

    try:
        if opts.input == "-":
            text = sys.stdin.read()
        else:
            with open(opts.input, "r", encoding="utf-8") as handle:
                text = handle.read()
    except OSError as exc:
        print(json.dumps({"error_kind": "IOError", "error": str(exc)}))
        return 2

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        print(json.dumps({"error_kind": "JSONError", "error": str(exc)}))
        return 2

    task_override = opts.task
    try:
        spec = load_problem(data, task_override=task_override,
                            j_order=opts.j_order, base_order=opts.base_order)
        if opts.verify is not None:
            spec.task = "verify"
            spec.args = dict(spec.args)
            spec.args["certificate"] = opts.verify
        report, code = run(spec)
    except (ProblemFormatError, ExpressionSyntaxError) as exc:
        print(json.dumps({"error_kind": exc.kind, "error": str(exc)}))
        return 2
    print(json.dumps(report, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
