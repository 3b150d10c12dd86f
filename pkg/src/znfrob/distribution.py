"""Distributions on a chart: rank, normalized generators, membership, and
the involutivity test.

A distribution is a finite list of homogeneous generator fields whose
tangent vectors at the origin are independent degree by degree.
Normalization left-multiplies the generator family by the inverse of the
square pivot block, after which generator i reads ``d/d(pivot_i) + tail``
with tails supported away from the pivot columns.  Membership against a
normalized family is then a forced solve: the candidate's pivot
coefficients are the only possible combination, and the leftover field is
the obstruction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ChartError, DependentAtPoint
from .fields import VectorField, bracket
from .grading import DegreeVector
from .linalg import GradedMatrix, RowSpan, invert_mod_J
from .series import ChartSpec, GradedSeries, certified_part


@dataclass(frozen=True)
class Rank:
    """Generator count per degree vector."""

    counts: tuple[tuple[DegreeVector, int], ...]

    @classmethod
    def of(cls, pairs: dict[DegreeVector, int]) -> "Rank":
        return cls(tuple(sorted(
            ((d, c) for d, c in pairs.items() if c),
            key=lambda dc: dc[0].bits,
        )))

    def count(self, degree: DegreeVector) -> int:
        for d, c in self.counts:
            if d == degree:
                return c
        return 0

    @property
    def total(self) -> int:
        return sum(c for _, c in self.counts)

    def to_json(self) -> dict[str, int]:
        return {"".join(str(b) for b in d.bits): c for d, c in self.counts}


class Distribution:
    """Generator list on a chart; generators must be homogeneous fields."""

    __slots__ = ("chart", "generators", "_norm_cache")

    def __init__(self, chart: ChartSpec, generators: Sequence[VectorField]):
        for g in generators:
            if g.chart != chart:
                raise ChartError("generator lives on another chart")
        self.chart = chart
        self.generators = tuple(generators)
        self._norm_cache: Optional[_Normalized] = None

    def __len__(self) -> int:
        return len(self.generators)

    def normalized(self) -> "_Normalized":
        if self._norm_cache is None:
            self._norm_cache = _normalize(self)
        return self._norm_cache


@dataclass(frozen=True)
class _Normalized:
    distribution: Distribution          # recombined generators
    pivots: tuple[str, ...]             # pivot coordinate per generator
    transform: GradedMatrix             # inverse pivot block: new = S @ old
    permutation: tuple[str, ...]        # pivots first, then the rest


def _normalize(D: Distribution) -> _Normalized:
    chart = D.chart
    gens = D.generators
    if not gens:
        identity = GradedMatrix.identity(chart, ())
        return _Normalized(D, (), identity, tuple(chart.names))

    # pivot selection: eliminate earlier rows, then take the first
    # coordinate in chart order whose constant entry survives
    width = len(chart.names)
    span = RowSpan(width)
    pivots: list[str] = []
    for gen in gens:
        row = gen.tangent_at_origin().as_row(chart)
        residual = span.residual(row)
        pivot_idx = next((i for i, x in enumerate(residual) if x), None)
        if pivot_idx is None:
            raise DependentAtPoint(
                "generators are linearly dependent at the base point")
        span.try_add(row)
        pivots.append(chart.names[pivot_idx])

    degrees = tuple(g.degree for g in gens)
    block = GradedMatrix(chart, degrees, degrees, [
        [gen.coefficient(p) for p in pivots] for gen in gens
    ])
    s = invert_mod_J(block)
    new_gens = []
    for i in range(len(gens)):
        acc = VectorField(chart, degrees[i], {})
        for j, gen in enumerate(gens):
            entry = s.entry(i, j)
            if entry.is_zero:
                continue
            acc = acc + gen.scaled_by(entry)
        new_gens.append(acc)
    rest = tuple(n for n in chart.names if n not in pivots)
    return _Normalized(
        Distribution(chart, new_gens),
        tuple(pivots),
        s,
        tuple(pivots) + rest,
    )


def rank_of(D: Distribution) -> Rank:
    """Per-degree generator count; the normalization pass certifies
    independence at the base point."""
    norm = D.normalized()
    counts: dict[DegreeVector, int] = {}
    for g in norm.distribution.generators:
        counts[g.degree] = counts.get(g.degree, 0) + 1
    return Rank.of(counts)


def normalize_generators(D: Distribution) -> tuple[Distribution, tuple[str, ...]]:
    """Recombined generators in pivot form plus the column permutation that
    lists the pivot coordinates first."""
    norm = D.normalized()
    return norm.distribution, norm.permutation


@dataclass(frozen=True)
class MembershipResult:
    contained: bool
    coefficients: Optional[tuple[GradedSeries, ...]]   # w.r.t. D's generators
    residual: Optional[VectorField]
    obstruction_coordinate: Optional[str]
    residual_order: Optional[int]    # least total degree of a residual term

    def __bool__(self) -> bool:
        return self.contained


def membership(X: VectorField, D: Distribution) -> MembershipResult:
    """Solve ``X = sum_t f_t G_t`` over the chart ring.

    Against the normalized family the pivot coefficients of X force the
    f_t, so the leftover field decides the answer: a residual inside the
    certified window is a definitive no at this truncation, while leftover
    terms on the truncation boundary are not trustworthy evidence either
    way and are ignored for the verdict (they are still reported).
    """
    if X.chart != D.chart:
        raise ChartError("field and distribution live on different charts")
    norm = D.normalized()
    gens = norm.distribution.generators
    forced = tuple(X.coefficient(p) for p in norm.pivots)
    residual = X
    for f, g in zip(forced, gens):
        if f.is_zero:
            continue
        residual = residual - g.scaled_by(f)
    decisive = {
        name: series for name, series in (
            (n, certified_part(residual.coefficient(n)))
            for n in D.chart.names
        ) if not series.is_zero
    }
    if not decisive:
        # translate to coefficients on the original generators: f = f' S
        s = norm.transform
        coeffs = []
        for j in range(len(gens)):
            acc = D.chart.zero()
            for i, f in enumerate(forced):
                entry = s.entry(i, j)
                if f.is_zero or entry.is_zero:
                    continue
                acc = acc + f * entry
            coeffs.append(acc)
        leftover = residual if not residual.is_zero else None
        return MembershipResult(True, tuple(coeffs), leftover, None, None)
    first = next(name for name in D.chart.names if name in decisive)
    order = min(
        m.total_degree for series in decisive.values() for m in series.terms
    )
    return MembershipResult(False, None, residual, first, order)


@dataclass(frozen=True)
class InvolutivityResult:
    involutive: bool
    witness_pair: Optional[tuple[int, int]]
    witness_bracket: Optional[VectorField]
    obstruction: Optional[MembershipResult]

    def __bool__(self) -> bool:
        return self.involutive


def is_involutive(D: Distribution) -> InvolutivityResult:
    """Check closure under the graded bracket for every generator pair
    (including a generator with itself: odd squares matter)."""
    gens = D.generators
    for i in range(len(gens)):
        for j in range(i, len(gens)):
            b = bracket(gens[i], gens[j])
            if b.is_zero:
                continue
            got = membership(b, D)
            if not got.contained:
                return InvolutivityResult(False, (i, j), b, got)
    return InvolutivityResult(True, None, None, None)
