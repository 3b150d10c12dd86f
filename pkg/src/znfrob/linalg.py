"""Matrices over the chart ring and exact linear algebra at the base point.

Invertibility of a graded matrix is decided by its value at the origin;
the full inverse is then recovered from the finite geometric series, which
terminates inside the truncation window because every entry of the error
matrix vanishes at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import (
    ChartError,
    DependentAtPoint,
    DimensionError,
    HomogeneityError,
    NotInvertibleModJ,
)
from .grading import DegreeVector
from .series import ChartSpec, GradedSeries, value_at_origin


# ---------------------------------------------------------------------------
# exact rational elimination helpers
# ---------------------------------------------------------------------------

def rational_inverse(rows: Sequence[Sequence[Fraction]]) -> Optional[list[list[Fraction]]]:
    """Gauss-Jordan inverse over Q; None when singular.

    Pivoting takes the first nonzero entry in order, keeping the result
    deterministic; exactness makes numerical pivoting unnecessary.
    """
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise DimensionError("inverse needs a square matrix")
    a = [[Fraction(x) for x in r] for r in rows]
    inv = [[Fraction(1) if i == j else Fraction(0) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            return None
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            inv[col], inv[piv] = inv[piv], inv[col]
        scale = a[col][col]
        a[col] = [x / scale for x in a[col]]
        inv[col] = [x / scale for x in inv[col]]
        for r in range(n):
            if r == col or not a[r][col]:
                continue
            factor = a[r][col]
            a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
            inv[r] = [x - factor * y for x, y in zip(inv[r], inv[col])]
    return inv


class RowSpan:
    """Incremental row space over Q, kept in reduced echelon form."""

    def __init__(self, width: int):
        self.width = width
        self.rows: list[list[Fraction]] = []
        self.pivots: list[int] = []

    def residual(self, vec: Sequence[Fraction]) -> list[Fraction]:
        v = [Fraction(x) for x in vec]
        for row, p in zip(self.rows, self.pivots):
            if v[p]:
                factor = v[p]
                v = [x - factor * y for x, y in zip(v, row)]
        return v

    def try_add(self, vec: Sequence[Fraction]) -> bool:
        """Add the vector if independent; returns False when it is in the span."""
        v = self.residual(vec)
        p = next((i for i, x in enumerate(v) if x), None)
        if p is None:
            return False
        scale = v[p]
        v = [x / scale for x in v]
        for row in self.rows:
            if row[p]:
                factor = row[p]
                row[:] = [x - factor * y for x, y in zip(row, v)]
        self.rows.append(v)
        self.pivots.append(p)
        return True

    def contains(self, vec: Sequence[Fraction]) -> bool:
        return all(not x for x in self.residual(vec))

    def __len__(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# tangent vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TangentVector:
    """Value of a homogeneous field at the origin: one rational per
    coordinate of matching degree."""

    degree: DegreeVector
    components: tuple[tuple[str, Fraction], ...]

    @classmethod
    def make(cls, degree: DegreeVector,
             components: Mapping[str, Fraction]) -> "TangentVector":
        items = tuple(sorted(
            (name, Fraction(c)) for name, c in components.items() if c
        ))
        return cls(degree, items)

    def component_map(self) -> dict[str, Fraction]:
        return dict(self.components)

    @property
    def is_zero(self) -> bool:
        return not self.components

    def as_row(self, chart: ChartSpec) -> list[Fraction]:
        row = [Fraction(0)] * len(chart.names)
        for name, c in self.components:
            row[chart.index(name)] = c
        return row

    def validate_on(self, chart: ChartSpec) -> None:
        for name, c in self.components:
            if chart.degree_of(name) != self.degree:
                raise HomogeneityError(
                    f"tangent component on {name!r} does not match degree "
                    f"{self.degree}")


# ---------------------------------------------------------------------------
# graded matrices
# ---------------------------------------------------------------------------

class GradedMatrix:
    """Rectangular matrix of series over the chart ring.

    ``row_degrees``/``col_degrees`` carry the graded bookkeeping; a matrix
    representing a degree-preserving module morphism has entry (i, j)
    homogeneous of degree ``row_degrees[i] + col_degrees[j]`` (checkable
    via ``validate_graded``), but general ring matrices – and the partial
    sums of the geometric inverse – may mix degrees freely.
    """

    __slots__ = ("chart", "row_degrees", "col_degrees", "entries")

    def __init__(self, chart: ChartSpec,
                 row_degrees: Sequence[DegreeVector],
                 col_degrees: Sequence[DegreeVector],
                 entries: Sequence[Sequence[GradedSeries]]):
        self.chart = chart
        self.row_degrees = tuple(row_degrees)
        self.col_degrees = tuple(col_degrees)
        if len(entries) != len(self.row_degrees):
            raise DimensionError("row count mismatch")
        rows = []
        for i, row in enumerate(entries):
            if len(row) != len(self.col_degrees):
                raise DimensionError("column count mismatch")
            for entry in row:
                if entry.chart != chart:
                    raise ChartError("matrix entry on a different chart")
            rows.append(tuple(row))
        self.entries = tuple(rows)

    def validate_graded(self) -> None:
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                want = self.row_degrees[i] + self.col_degrees[j]
                if not entry.is_homogeneous_of(want):
                    raise HomogeneityError(
                        f"entry ({i},{j}) must be homogeneous of degree {want}")

    @classmethod
    def identity(cls, chart: ChartSpec,
                 degrees: Sequence[DegreeVector]) -> "GradedMatrix":
        n = len(degrees)
        return cls(chart, degrees, degrees, [
            [chart.one() if i == j else chart.zero() for j in range(n)]
            for i in range(n)
        ])

    @classmethod
    def from_rationals(cls, chart: ChartSpec,
                       row_degrees: Sequence[DegreeVector],
                       col_degrees: Sequence[DegreeVector],
                       values: Sequence[Sequence[Fraction]]) -> "GradedMatrix":
        return cls(chart, row_degrees, col_degrees, [
            [chart.constant(v) if v else chart.zero() for v in row]
            for row in values
        ])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.row_degrees), len(self.col_degrees))

    def entry(self, i: int, j: int) -> GradedSeries:
        return self.entries[i][j]

    def __matmul__(self, other: "GradedMatrix") -> "GradedMatrix":
        if self.chart != other.chart:
            raise ChartError("matrices on different charts")
        if self.col_degrees != other.row_degrees:
            raise DimensionError("inner degree profiles do not match")
        rows = []
        for i in range(len(self.row_degrees)):
            row = []
            for j in range(len(other.col_degrees)):
                acc = self.chart.zero()
                for k in range(len(self.col_degrees)):
                    a = self.entries[i][k]
                    b = other.entries[k][j]
                    if a.is_zero or b.is_zero:
                        continue
                    acc = acc + a * b
                row.append(acc)
            rows.append(row)
        return GradedMatrix(self.chart, self.row_degrees, other.col_degrees, rows)

    def __add__(self, other: "GradedMatrix") -> "GradedMatrix":
        self._check_same_shape(other)
        return GradedMatrix(self.chart, self.row_degrees, self.col_degrees, [
            [a + b for a, b in zip(ra, rb)]
            for ra, rb in zip(self.entries, other.entries)
        ])

    def __sub__(self, other: "GradedMatrix") -> "GradedMatrix":
        self._check_same_shape(other)
        return GradedMatrix(self.chart, self.row_degrees, self.col_degrees, [
            [a - b for a, b in zip(ra, rb)]
            for ra, rb in zip(self.entries, other.entries)
        ])

    def __neg__(self) -> "GradedMatrix":
        return GradedMatrix(self.chart, self.row_degrees, self.col_degrees, [
            [-a for a in row] for row in self.entries
        ])

    def _check_same_shape(self, other: "GradedMatrix") -> None:
        if self.chart != other.chart:
            raise ChartError("matrices on different charts")
        if (self.row_degrees != other.row_degrees
                or self.col_degrees != other.col_degrees):
            raise DimensionError("degree profiles do not match")

    @property
    def is_zero(self) -> bool:
        return all(e.is_zero for row in self.entries for e in row)

    def value_at_origin(self) -> list[list[Fraction]]:
        return [[value_at_origin(e) for e in row] for row in self.entries]

    def __eq__(self, other):
        if not isinstance(other, GradedMatrix):
            return NotImplemented
        return (self.chart == other.chart
                and self.row_degrees == other.row_degrees
                and self.col_degrees == other.col_degrees
                and self.entries == other.entries)

    def __repr__(self) -> str:
        body = "; ".join(
            ", ".join(str(e) for e in row) for row in self.entries
        )
        return f"GradedMatrix[{body}]"


def invert_mod_J(matrix: GradedMatrix) -> GradedMatrix:
    """Two-sided inverse of a square graded matrix, exact in the window.

    With S the rational inverse of the matrix at the origin, the error
    X = S*T - I vanishes at the origin, so X^k dies once k exceeds
    j_order + base_order and the alternating geometric sum times S is the
    inverse.
    """
    if matrix.row_degrees != matrix.col_degrees:
        raise DimensionError("inverse needs row degrees equal to column degrees")
    chart = matrix.chart
    degrees = matrix.row_degrees
    t0 = matrix.value_at_origin()
    s0 = rational_inverse(t0)
    if s0 is None:
        raise NotInvertibleModJ("matrix is singular at the base point")
    s = GradedMatrix.from_rationals(chart, degrees, degrees, s0)
    x = (s @ matrix) - GradedMatrix.identity(chart, degrees)
    total = GradedMatrix.identity(chart, degrees)
    power = GradedMatrix.identity(chart, degrees)
    sign = -1
    for _ in range(chart.j_order + chart.base_order):
        power = power @ x
        if power.is_zero:
            break
        total = (total + power) if sign > 0 else (total - power)
        sign = -sign
    return total @ s


def complete_basis(vectors: Sequence[TangentVector],
                   chart: ChartSpec) -> list[str]:
    """Names of coordinate derivations extending the given tangent vectors
    to a basis of the tangent space at the origin.

    Inputs are first checked for per-degree independence; the extension
    picks, per degree, the first coordinates in chart order whose
    derivations stay outside the span built so far.
    """
    spans: dict[DegreeVector, RowSpan] = {}
    width = len(chart.names)
    for v in vectors:
        v.validate_on(chart)
        if v.is_zero:
            raise DependentAtPoint("zero tangent vector in the input family")
        span = spans.setdefault(v.degree, RowSpan(width))
        if not span.try_add(v.as_row(chart)):
            raise DependentAtPoint(
                "input tangent vectors are dependent at the base point")
    chosen: list[str] = []
    for i, name in enumerate(chart.names):
        deg = chart.degrees[i]
        span = spans.setdefault(deg, RowSpan(width))
        unit = [Fraction(0)] * width
        unit[i] = Fraction(1)
        if span.try_add(unit):
            chosen.append(name)
    return chosen
