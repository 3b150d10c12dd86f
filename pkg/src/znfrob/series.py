"""Truncated series over a graded chart, with Koszul-signed arithmetic.

The chart ring is modelled as the quotient of the free (Z_2)^n-graded
commutative algebra on the chart coordinates by two relations:

* odd coordinates square to zero,
* monomials whose J-degree (total exponent of nonzero-degree coordinates)
  exceeds ``j_order`` or whose base degree exceeds ``base_order`` are zero.

Monomials are kept canonical: factors sorted by chart coordinate order,
all reordering signs folded into the exact ``Fraction`` coefficient.
Dropping a monomial during multiplication or substitution is therefore
*exact* quotient-ring arithmetic and carries no flag.  Antiderivatives are
the one lifted operation that can genuinely lose information: when the
integral of a representable term is not representable, the term is dropped
and the result is marked with a truncation-loss flag (``base_loss`` /
``j_loss``) that propagates through everything computed from it.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Union

from .errors import (
    CenteringError,
    ChartError,
    DimensionError,
    HomogeneityError,
    OddIntegrationError,
    UnknownCoordinateError,
)
from .grading import DegreeVector

Rational = Union[Fraction, int, str]


# ---------------------------------------------------------------------------
# chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartSpec:
    """Named graded coordinates plus the truncation orders of the ring.

    Coordinates of degree zero are the base coordinates; all others
    generate the ideal J.  The given coordinate order is the canonical
    monomial order.  The chart is centered at the origin.
    """

    n: int
    coordinates: tuple[tuple[str, DegreeVector], ...]
    j_order: int = 4
    base_order: int = 6

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError("chart needs n >= 1")
        if self.j_order < 1 or self.base_order < 1:
            raise DimensionError("truncation orders must be positive")
        names = [name for name, _ in self.coordinates]
        if len(set(names)) != len(names):
            raise ChartError(f"duplicate coordinate names: {names}")
        for name, deg in self.coordinates:
            if deg.n != self.n:
                raise DimensionError(
                    f"coordinate {name!r} has degree length {deg.n}, chart has n={self.n}"
                )

    @classmethod
    def build(cls, n: int, coords: Iterable[tuple[str, Iterable[int]]],
              j_order: int = 4, base_order: int = 6) -> "ChartSpec":
        return cls(
            n=n,
            coordinates=tuple((name, DegreeVector(tuple(deg))) for name, deg in coords),
            j_order=j_order,
            base_order=base_order,
        )

    # -- cached structure ---------------------------------------------------

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.coordinates)

    @cached_property
    def degrees(self) -> tuple[DegreeVector, ...]:
        return tuple(deg for _, deg in self.coordinates)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    @cached_property
    def odd_flags(self) -> tuple[bool, ...]:
        return tuple(deg.is_odd for deg in self.degrees)

    @cached_property
    def base_flags(self) -> tuple[bool, ...]:
        return tuple(deg.is_zero for deg in self.degrees)

    @cached_property
    def base_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.base_flags) if f)

    @cached_property
    def nonzero_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.base_flags) if not f)

    @cached_property
    def pair_table(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(a.dot(b) for b in self.degrees) for a in self.degrees
        )

    @cached_property
    def zero_degree(self) -> DegreeVector:
        return DegreeVector.zero(self.n)

    @cached_property
    def unit_monomial(self) -> "Monomial":
        return Monomial((0,) * len(self.coordinates))

    # -- lookups --------------------------------------------------------------

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownCoordinateError(f"unknown coordinate {name!r}") from None

    def degree_of(self, name: str) -> DegreeVector:
        return self.degrees[self.index(name)]

    def is_base(self, name: str) -> bool:
        return self.base_flags[self.index(name)]

    def base_names(self) -> tuple[str, ...]:
        return tuple(self.names[i] for i in self.base_indices)

    def nonzero_names(self) -> tuple[str, ...]:
        return tuple(self.names[i] for i in self.nonzero_indices)

    def with_truncation(self, j_order: Optional[int] = None,
                        base_order: Optional[int] = None) -> "ChartSpec":
        return ChartSpec(
            n=self.n,
            coordinates=self.coordinates,
            j_order=self.j_order if j_order is None else j_order,
            base_order=self.base_order if base_order is None else base_order,
        )

    def same_frame(self, other: "ChartSpec") -> bool:
        """Same coordinates and degrees, truncation orders may differ."""
        return self.n == other.n and self.coordinates == other.coordinates

    # -- series factories -----------------------------------------------------

    def zero(self) -> "GradedSeries":
        return GradedSeries(self, {})

    def constant(self, value: Rational) -> "GradedSeries":
        return GradedSeries(self, {self.unit_monomial: Fraction(value)})

    def one(self) -> "GradedSeries":
        return self.constant(1)

    def coordinate(self, name: str) -> "GradedSeries":
        i = self.index(name)
        exps = [0] * len(self.coordinates)
        exps[i] = 1
        return GradedSeries(self, {Monomial(tuple(exps)): Fraction(1)})

    def monomial(self, exponents: Mapping[str, int],
                 coefficient: Rational = 1) -> "GradedSeries":
        exps = [0] * len(self.coordinates)
        for name, e in exponents.items():
            exps[self.index(name)] = int(e)
        return GradedSeries(self, {Monomial(tuple(exps)): Fraction(coefficient)})


# ---------------------------------------------------------------------------
# monomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Monomial:
    """Canonical monomial: exponents aligned with the chart coordinate order."""

    exps: tuple[int, ...]

    def j_degree(self, chart: ChartSpec) -> int:
        return sum(self.exps[i] for i in chart.nonzero_indices)

    def base_degree(self, chart: ChartSpec) -> int:
        return sum(self.exps[i] for i in chart.base_indices)

    @property
    def total_degree(self) -> int:
        return sum(self.exps)

    def degree(self, chart: ChartSpec) -> DegreeVector:
        bits = [0] * chart.n
        for i, e in enumerate(self.exps):
            if e % 2:
                for k, b in enumerate(chart.degrees[i].bits):
                    bits[k] = (bits[k] + b) % 2
        return DegreeVector(tuple(bits))

    def exponents(self, chart: ChartSpec) -> dict[str, int]:
        return {chart.names[i]: e for i, e in enumerate(self.exps) if e}

    def label(self, chart: ChartSpec) -> str:
        if not any(self.exps):
            return "1"
        parts = []
        for i, e in enumerate(self.exps):
            if not e:
                continue
            name = chart.names[i]
            parts.append(name if e == 1 else f"{name}^{e}")
        return "*".join(parts)

    @property
    def is_unit(self) -> bool:
        return not any(self.exps)


# ---------------------------------------------------------------------------
# truncation-drop reporting (used by the parser to warn about dropped terms)
# ---------------------------------------------------------------------------

_DROP_SINKS: list[list[tuple[Monomial, Fraction]]] = []


@contextlib.contextmanager
def collect_truncation_drops():
    """Collect monomials dropped by the truncation window inside the block."""
    sink: list[tuple[Monomial, Fraction]] = []
    _DROP_SINKS.append(sink)
    try:
        yield sink
    finally:
        _DROP_SINKS.pop()


def _note_drop(mon: Monomial, coeff: Fraction) -> None:
    if _DROP_SINKS:
        _DROP_SINKS[-1].append((mon, coeff))


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------

class GradedSeries:
    """Element of the truncated chart ring with exact rational coefficients."""

    __slots__ = ("chart", "terms", "declared_degree", "base_loss", "j_loss")

    def __init__(self, chart: ChartSpec,
                 terms: Mapping[Monomial, Rational],
                 declared_degree: Optional[DegreeVector] = None,
                 *, base_loss: bool = False, j_loss: bool = False,
                 _trusted: bool = False):
        self.chart = chart
        self.base_loss = base_loss
        self.j_loss = j_loss
        if _trusted:
            clean = {m: c for m, c in terms.items() if c}
        else:
            clean = {}
            for mon, raw in terms.items():
                coeff = Fraction(raw)
                if not coeff:
                    continue
                if any(mon.exps[i] > 1 for i in chart.nonzero_indices
                       if chart.odd_flags[i]):
                    continue  # odd square: zero in the ring
                if (mon.j_degree(chart) > chart.j_order
                        or mon.base_degree(chart) > chart.base_order):
                    _note_drop(mon, coeff)
                    continue
                clean[mon] = clean.get(mon, Fraction(0)) + coeff
            clean = {m: c for m, c in clean.items() if c}
        self.terms: dict[Monomial, Fraction] = clean
        if declared_degree is not None:
            for mon in clean:
                if mon.degree(chart) != declared_degree:
                    raise HomogeneityError(
                        f"monomial {mon.label(chart)} has degree "
                        f"{mon.degree(chart)}, declared {declared_degree}"
                    )
            self.declared_degree = declared_degree
        else:
            degs = {mon.degree(chart) for mon in clean}
            self.declared_degree = degs.pop() if len(degs) == 1 else None

    # -- basic structure ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> Optional[DegreeVector]:
        return self.declared_degree

    def is_homogeneous_of(self, degree: DegreeVector) -> bool:
        return all(mon.degree(self.chart) == degree for mon in self.terms)

    @property
    def constant_term(self) -> Fraction:
        return self.terms.get(self.chart.unit_monomial, Fraction(0))

    def coefficient(self, mon: Monomial) -> Fraction:
        return self.terms.get(mon, Fraction(0))

    def j_valuation(self) -> Optional[int]:
        """Least J-degree among monomials; None for the zero series."""
        if not self.terms:
            return None
        return min(m.j_degree(self.chart) for m in self.terms)

    def min_total_degree(self) -> Optional[int]:
        if not self.terms:
            return None
        return min(m.total_degree for m in self.terms)

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(),
                      key=lambda mc: (mc[0].total_degree, mc[0].exps))

    def _flags_with(self, *others: "GradedSeries") -> dict:
        return {
            "base_loss": self.base_loss or any(o.base_loss for o in others),
            "j_loss": self.j_loss or any(o.j_loss for o in others),
        }

    # -- ring operations ------------------------------------------------------

    def _check_chart(self, other: "GradedSeries") -> None:
        if self.chart != other.chart:
            raise ChartError("series live on different charts")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.chart.constant(other)
        if not isinstance(other, GradedSeries):
            return NotImplemented
        self._check_chart(other)
        terms = dict(self.terms)
        for mon, c in other.terms.items():
            acc = terms.get(mon, Fraction(0)) + c
            if acc:
                terms[mon] = acc
            else:
                terms.pop(mon, None)
        return GradedSeries(self.chart, terms, _trusted=True,
                            **self._flags_with(other))

    __radd__ = __add__

    def __neg__(self):
        return GradedSeries(self.chart, {m: -c for m, c in self.terms.items()},
                            self.declared_degree, _trusted=True,
                            base_loss=self.base_loss, j_loss=self.j_loss)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.chart.constant(other)
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GradedSeries):
            return multiply(self, other)
        if isinstance(other, (int, Fraction)):
            if not other:
                return self.chart.zero()
            return GradedSeries(
                self.chart, {m: c * other for m, c in self.terms.items()},
                self.declared_degree, _trusted=True,
                base_loss=self.base_loss, j_loss=self.j_loss)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and other:
            return self * (Fraction(1) / Fraction(other))
        return NotImplemented

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("series powers take a nonnegative integer")
        result = self.chart.one()
        for _ in range(exponent):
            result = multiply(result, self)
        return result

    def __eq__(self, other):
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self.chart == other.chart and self.terms == other.terms

    def __hash__(self):
        return hash((self.chart, frozenset(self.terms.items())))

    # -- calculus -------------------------------------------------------------

    def derive(self, name: str) -> "GradedSeries":
        return derive(self, name)

    def antiderivative(self, name: str,
                       boundary: str = "vanish_at_zero") -> "GradedSeries":
        return antiderivative(self, name, boundary)

    def reduce(self, mode: str):
        return reduce_series(self, mode)

    def truncated_to(self, chart: ChartSpec) -> "GradedSeries":
        """Re-truncate onto a chart with the same frame but lower orders."""
        if not self.chart.same_frame(chart):
            raise ChartError("truncation target must share the coordinate frame")
        terms = {
            m: c for m, c in self.terms.items()
            if m.j_degree(chart) <= chart.j_order
            and m.base_degree(chart) <= chart.base_order
        }
        return GradedSeries(chart, terms, _trusted=True,
                            base_loss=self.base_loss, j_loss=self.j_loss)

    # -- presentation -----------------------------------------------------------

    def to_json_map(self) -> dict[str, str]:
        return {m.label(self.chart): str(c) for m, c in self.sorted_terms()}

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for mon, coeff in self.sorted_terms():
            sign = "-" if coeff < 0 else "+"
            mag = -coeff if coeff < 0 else coeff
            if mon.is_unit:
                body = str(mag)
            elif mag == 1:
                body = mon.label(self.chart)
            else:
                body = f"{mag}*{mon.label(self.chart)}"
            pieces.append((sign, mag, mon, body))
        first_sign, first_mag, first_mon, first_body = pieces[0]
        if first_sign == "-":
            # a leading "-e^2" would reparse as (-e)^2: unary minus binds
            # tighter than '^', so spell the unit coefficient out
            if first_mag == 1 and not first_mon.is_unit:
                first_body = f"1*{first_body}"
            out = "-" + first_body
        else:
            out = first_body
        for sign, _, _, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self) -> str:
        return f"GradedSeries({self})"


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _same_chart(f: GradedSeries, g: GradedSeries) -> ChartSpec:
    if f.chart != g.chart:
        raise ChartError("series live on different charts")
    return f.chart


def multiply(f: GradedSeries, g: GradedSeries) -> GradedSeries:
    """Koszul-signed product, truncated to the chart window.

    Merging two canonical monomials moves every right factor of coordinate
    index j past the left factors of index i > j; each pass contributes
    ``(-1)^{<deg_i, deg_j>}``.
    """
    chart = _same_chart(f, g)
    pair = chart.pair_table
    odd = chart.odd_flags
    nz_idx = chart.nonzero_indices
    b_idx = chart.base_indices
    jmax, bmax = chart.j_order, chart.base_order

    out: dict[Monomial, Fraction] = {}
    for m1, c1 in f.terms.items():
        e1 = m1.exps
        nz1 = [i for i, v in enumerate(e1) if v]
        for m2, c2 in g.terms.items():
            e2 = m2.exps
            sign_exp = 0
            dead = False
            for j, vj in enumerate(e2):
                if not vj:
                    continue
                if e1[j] and odd[j]:
                    dead = True
                    break
                pj = pair[j]
                for i in nz1:
                    if i > j:
                        sign_exp += e1[i] * vj * pj[i]
            if dead:
                continue
            merged = tuple(a + b for a, b in zip(e1, e2))
            if sum(merged[i] for i in nz_idx) > jmax:
                _note_drop(Monomial(merged), c1 * c2)
                continue
            if sum(merged[i] for i in b_idx) > bmax:
                _note_drop(Monomial(merged), c1 * c2)
                continue
            coeff = c1 * c2 if sign_exp % 2 == 0 else -c1 * c2
            mon = Monomial(merged)
            acc = out.get(mon)
            if acc is None:
                out[mon] = coeff
            else:
                acc += coeff
                if acc:
                    out[mon] = acc
                else:
                    del out[mon]

    declared = None
    if f.declared_degree is not None and g.declared_degree is not None:
        declared = f.declared_degree + g.declared_degree
    result = GradedSeries(chart, out, _trusted=True, **f._flags_with(g))
    if declared is not None and result.terms:
        # trusted path skips the homogeneity scan; record the known degree
        result.declared_degree = declared
    return result


def derive(f: GradedSeries, name: str) -> GradedSeries:
    """Graded left partial derivative along a chart coordinate."""
    chart = f.chart
    k = chart.index(name)
    pair_k = chart.pair_table[k]
    out: dict[Monomial, Fraction] = {}
    for mon, coeff in f.terms.items():
        e = mon.exps
        if not e[k]:
            continue
        sign_exp = sum(e[j] * pair_k[j] for j in range(k) if e[j])
        c = coeff * e[k]
        if sign_exp % 2:
            c = -c
        new = list(e)
        new[k] -= 1
        key = Monomial(tuple(new))
        acc = out.get(key)
        out[key] = c if acc is None else acc + c
    out = {m: c for m, c in out.items() if c}
    declared = None
    if f.declared_degree is not None:
        declared = f.declared_degree + chart.degrees[k]
    result = GradedSeries(chart, out, _trusted=True,
                          base_loss=f.base_loss, j_loss=f.j_loss)
    if declared is not None and result.terms:
        result.declared_degree = declared
    return result


def antiderivative(f: GradedSeries, name: str,
                   boundary: str = "vanish_at_zero") -> GradedSeries:
    """Inverse of `derive` along an even coordinate, vanishing at zero.

    Terms whose integral leaves the truncation window are dropped and the
    matching loss flag is set on the result; everything representable
    satisfies ``derive(name, result) == f`` exactly.
    """
    if boundary != "vanish_at_zero":
        raise ValueError(f"unsupported boundary condition {boundary!r}")
    chart = f.chart
    k = chart.index(name)
    if chart.odd_flags[k]:
        raise OddIntegrationError(
            f"cannot integrate along odd coordinate {name!r}")
    is_base = chart.base_flags[k]
    pair_k = chart.pair_table[k]
    out: dict[Monomial, Fraction] = {}
    base_loss = f.base_loss
    j_loss = f.j_loss
    for mon, coeff in f.terms.items():
        e = mon.exps
        new = list(e)
        new[k] += 1
        key = Monomial(tuple(new))
        if is_base:
            if key.base_degree(chart) > chart.base_order:
                _note_drop(key, coeff)
                base_loss = True
                continue
        else:
            if key.j_degree(chart) > chart.j_order:
                _note_drop(key, coeff)
                j_loss = True
                continue
        sign_exp = sum(e[j] * pair_k[j] for j in range(k) if e[j])
        c = coeff / (e[k] + 1)
        if sign_exp % 2:
            c = -c
        out[key] = c
    result = GradedSeries(chart, out, _trusted=True,
                          base_loss=base_loss, j_loss=j_loss)
    if f.declared_degree is not None and result.terms:
        result.declared_degree = f.declared_degree + chart.degrees[k]
    return result


def is_boundary_monomial(mon: Monomial, chart: ChartSpec) -> bool:
    """True where truncated pipelines stop being reliable witnesses.

    Derivatives along nonzero-degree coordinates pull dropped content down
    one J-layer, base derivatives do the same for the base order, and a
    substitution whose base images carry J-positive terms can fold a
    dropped pure-base tail back into the window at total degree past
    ``base_order``.  Identities certified by the solver therefore exclude
    these monomials; everything below them is exact.
    """
    return (mon.j_degree(chart) >= chart.j_order
            or mon.base_degree(chart) >= chart.base_order
            or mon.total_degree > chart.base_order)


def certified_part(f: GradedSeries) -> GradedSeries:
    """The sub-series supported on the certified window."""
    terms = {m: c for m, c in f.terms.items()
             if not is_boundary_monomial(m, f.chart)}
    return GradedSeries(f.chart, terms, _trusted=True,
                        base_loss=f.base_loss, j_loss=f.j_loss)


def reduce_series(f: GradedSeries, mode: str):
    """``mod_J`` deletes every monomial touching J; ``at_point`` also sets
    the base coordinates to zero and returns the rational value."""
    chart = f.chart
    if mode == "mod_J":
        terms = {m: c for m, c in f.terms.items() if m.j_degree(chart) == 0}
        return GradedSeries(chart, terms, _trusted=True,
                            base_loss=f.base_loss, j_loss=f.j_loss)
    if mode == "at_point":
        return f.constant_term
    raise ValueError(f"unknown reduction mode {mode!r}")


def reduce_mod_j(f: GradedSeries) -> GradedSeries:
    return reduce_series(f, "mod_J")


def value_at_origin(f: GradedSeries) -> Fraction:
    return reduce_series(f, "at_point")


def compose(f: GradedSeries, images: Mapping[str, GradedSeries],
            into_chart: ChartSpec) -> GradedSeries:
    """Substitute an image series for every coordinate of ``f``.

    ``images`` maps each coordinate name of ``f.chart`` to a series on
    ``into_chart``.  Images must be homogeneous of the coordinate's degree
    (or zero) and centered; identical degrees make the substitution a
    morphism of graded rings, so the canonical word can be expanded in
    coordinate order without extra signs.
    """
    chart = f.chart
    for name in chart.names:
        if name not in images:
            raise UnknownCoordinateError(f"no image for coordinate {name!r}")
        img = images[name]
        if img.chart != into_chart:
            raise ChartError(f"image of {name!r} lives on the wrong chart")
        if not img.is_homogeneous_of(chart.degree_of(name)):
            raise HomogeneityError(
                f"image of {name!r} is not homogeneous of degree "
                f"{chart.degree_of(name)}")
        if img.constant_term:
            raise CenteringError(f"image of {name!r} does not vanish at the origin")

    result = into_chart.zero()
    pow_cache: dict[tuple[int, int], GradedSeries] = {}

    def power(i: int, e: int) -> GradedSeries:
        key = (i, e)
        got = pow_cache.get(key)
        if got is None:
            img = images[chart.names[i]]
            got = img
            for _ in range(e - 1):
                got = multiply(got, img)
            pow_cache[key] = got
        return got

    for mon, coeff in f.terms.items():
        acc = into_chart.constant(coeff)
        for i, e in enumerate(mon.exps):
            if not e:
                continue
            acc = multiply(acc, power(i, e))
            if acc.is_zero:
                break
        result = result + acc

    flags = {
        "base_loss": f.base_loss or any(img.base_loss for img in images.values()),
        "j_loss": f.j_loss or any(img.j_loss for img in images.values()),
    }
    out = GradedSeries(into_chart, result.terms, _trusted=True, **flags)
    if f.declared_degree is not None and out.terms:
        out.declared_degree = f.declared_degree
    return out
