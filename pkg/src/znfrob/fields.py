"""Homogeneous derivations of the chart ring and coordinate changes.

A coordinate change stores both directions eagerly:

* ``images``: each *target* coordinate written as a centered, homogeneous
  series in the *source* coordinates (the new coordinates as functions of
  the old);
* ``inverse_images``: each source coordinate written in target
  coordinates, solved order-by-order in total degree from the linear part.

``substitute(f, change)`` takes a series on the target chart into the
source chart; ``pushforward(change, X)`` rewrites a field on the source
chart in the target coordinates.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .errors import (
    CenteringError,
    ChartError,
    HomogeneityError,
    InternalInconsistency,
    JacobianSingular,
    UnknownCoordinateError,
)
from .grading import DegreeVector, scalar_product
from .linalg import TangentVector, rational_inverse
from .series import ChartSpec, GradedSeries, compose, derive, multiply, value_at_origin


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

class VectorField:
    """Homogeneous derivation ``sum_u a_u d/du`` with series coefficients.

    Each coefficient ``a_u`` is homogeneous of degree ``degree + deg(u)``
    or zero.
    """

    __slots__ = ("chart", "degree", "coefficients")

    def __init__(self, chart: ChartSpec, degree: DegreeVector,
                 coefficients: Mapping[str, GradedSeries]):
        self.chart = chart
        self.degree = degree
        coeffs: dict[str, GradedSeries] = {}
        for name, series in coefficients.items():
            idx = chart.index(name)  # raises for unknown names
            if series.chart != chart:
                raise ChartError(f"coefficient on {name!r} lives on another chart")
            if series.is_zero:
                continue
            want = degree + chart.degrees[idx]
            if not series.is_homogeneous_of(want):
                raise HomogeneityError(
                    f"coefficient on {name!r} must be homogeneous of degree {want}")
            coeffs[name] = series
        self.coefficients = coeffs

    @classmethod
    def coordinate_derivation(cls, chart: ChartSpec, name: str) -> "VectorField":
        return cls(chart, chart.degree_of(name), {name: chart.one()})

    def coefficient(self, name: str) -> GradedSeries:
        got = self.coefficients.get(name)
        return got if got is not None else self.chart.zero()

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def apply(self, f: GradedSeries) -> GradedSeries:
        if f.chart != self.chart:
            raise ChartError("field and series live on different charts")
        acc = self.chart.zero()
        for name, a in self.coefficients.items():
            df = derive(f, name)
            if df.is_zero:
                continue
            acc = acc + multiply(a, df)
        return acc

    def tangent_at_origin(self) -> TangentVector:
        comps = {
            name: value_at_origin(a)
            for name, a in self.coefficients.items()
        }
        return TangentVector.make(self.degree, comps)

    def scaled_by(self, f: GradedSeries) -> "VectorField":
        """Left multiplication by a homogeneous series."""
        if f.chart != self.chart:
            raise ChartError("scalar lives on another chart")
        if f.is_zero:
            return VectorField(self.chart, self.degree, {})
        if f.degree is None:
            raise HomogeneityError("scaling series must be homogeneous")
        return VectorField(self.chart, f.degree + self.degree, {
            name: multiply(f, a) for name, a in self.coefficients.items()
        })

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check_compatible(other)
        degree = other.degree if self.is_zero else self.degree
        out: dict[str, GradedSeries] = {}
        for name in self.chart.names:
            s = self.coefficient(name) + other.coefficient(name)
            if not s.is_zero:
                out[name] = s
        return VectorField(self.chart, degree, out)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-other)

    def __neg__(self) -> "VectorField":
        return VectorField(self.chart, self.degree, {
            name: -a for name, a in self.coefficients.items()
        })

    def _check_compatible(self, other: "VectorField") -> None:
        if self.chart != other.chart:
            raise ChartError("fields live on different charts")
        if (not self.is_zero and not other.is_zero
                and self.degree != other.degree):
            raise HomogeneityError(
                f"cannot combine fields of degrees {self.degree} and {other.degree}")

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        if self.chart != other.chart or self.coefficients != other.coefficients:
            return False
        if self.is_zero and other.is_zero:
            return True
        return self.degree == other.degree

    def truncated_to(self, chart: ChartSpec) -> "VectorField":
        return VectorField(chart, self.degree, {
            name: a.truncated_to(chart)
            for name, a in self.coefficients.items()
        })

    def to_json_dict(self) -> dict:
        return {
            "degree": self.degree.to_json(),
            "coefficients": {
                name: str(self.coefficients[name])
                for name in self.chart.names if name in self.coefficients
            },
        }

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        parts = []
        for name in self.chart.names:
            a = self.coefficients.get(name)
            if a is not None:
                parts.append(f"({a})*d/d{name}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"VectorField({self})"


def apply_field(X: VectorField, f: GradedSeries) -> GradedSeries:
    return X.apply(f)


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Graded Lie bracket ``X o Y - (-1)^{<deg X, deg Y>} Y o X``, computed
    coefficient-wise; the second-order terms cancel identically."""
    if X.chart != Y.chart:
        raise ChartError("fields live on different charts")
    chart = X.chart
    sign = -1 if scalar_product(X.degree, Y.degree) else 1
    out: dict[str, GradedSeries] = {}
    for name in chart.names:
        a = X.apply(Y.coefficient(name))
        b = Y.apply(X.coefficient(name))
        c = a - b if sign > 0 else a + b
        if not c.is_zero:
            out[name] = c
    return VectorField(chart, X.degree + Y.degree, out)


# ---------------------------------------------------------------------------
# coordinate changes
# ---------------------------------------------------------------------------

def _check_frames(source: ChartSpec, target: ChartSpec) -> None:
    if source.n != target.n:
        raise ChartError("charts have different grading groups")
    if (source.j_order, source.base_order) != (target.j_order, target.base_order):
        raise ChartError("charts have different truncation orders")
    src_profile = sorted(d.bits for d in source.degrees)
    tgt_profile = sorted(d.bits for d in target.degrees)
    if src_profile != tgt_profile:
        raise ChartError("charts have different degree profiles")


def _linear_matrix(images: Mapping[str, GradedSeries],
                   keyed: ChartSpec, values_on: ChartSpec) -> list[list[Fraction]]:
    """Rows indexed by ``keyed`` coordinates, columns by ``values_on``
    coordinates; entry = coefficient of the linear monomial."""
    width = len(values_on.names)
    rows = []
    for name in keyed.names:
        img = images[name]
        row = [Fraction(0)] * width
        for mon, c in img.terms.items():
            if mon.total_degree == 1:
                col = next(i for i, e in enumerate(mon.exps) if e)
                row[col] = c
        rows.append(row)
    return rows


def _validate_images(images: Mapping[str, GradedSeries],
                     keyed: ChartSpec, values_on: ChartSpec) -> None:
    if set(images) != set(keyed.names):
        missing = set(keyed.names) - set(images)
        extra = set(images) - set(keyed.names)
        raise UnknownCoordinateError(
            f"images must cover the chart exactly (missing {sorted(missing)},"
            f" extra {sorted(extra)})")
    for name in keyed.names:
        img = images[name]
        if img.chart != values_on:
            raise ChartError(f"image of {name!r} lives on the wrong chart")
        if not img.is_homogeneous_of(keyed.degree_of(name)):
            raise HomogeneityError(
                f"image of {name!r} must be homogeneous of degree "
                f"{keyed.degree_of(name)}")
        if img.constant_term:
            raise CenteringError(
                f"image of {name!r} does not vanish at the base point")


def _invert_map(images: Mapping[str, GradedSeries],
                keyed: ChartSpec, values_on: ChartSpec) -> dict[str, GradedSeries]:
    """Inverse substitution of ``images`` (keyed chart written on the value
    chart), solved layer-by-layer in total degree."""
    jmat = _linear_matrix(images, keyed, values_on)
    ainv = rational_inverse(jmat)
    if ainv is None:
        raise JacobianSingular("coordinate change has singular Jacobian at the base point")
    # linear parts and higher-order remainders of the forward images
    linear: dict[str, GradedSeries] = {}
    higher: dict[str, GradedSeries] = {}
    for r, name in enumerate(keyed.names):
        lin = values_on.zero()
        for c, vname in enumerate(values_on.names):
            if jmat[r][c]:
                lin = lin + values_on.coordinate(vname) * jmat[r][c]
        linear[name] = lin
        higher[name] = images[name] - lin

    def solve_once(current: dict[str, GradedSeries]) -> dict[str, GradedSeries]:
        out: dict[str, GradedSeries] = {}
        correction: dict[str, GradedSeries] = {}
        for k, name in enumerate(keyed.names):
            h = higher[name]
            correction[name] = (
                keyed.zero() if h.is_zero else compose(h, current, keyed)
            )
        for u, uname in enumerate(values_on.names):
            acc = keyed.zero()
            for k, kname in enumerate(keyed.names):
                coeff = ainv[u][k]
                if not coeff:
                    continue
                acc = acc + (keyed.coordinate(kname) - correction[kname]) * coeff
            out[uname] = acc
        return out

    current = {
        uname: sum(
            (keyed.coordinate(kname) * ainv[u][k]
             for k, kname in enumerate(keyed.names) if ainv[u][k]),
            keyed.zero(),
        )
        for u, uname in enumerate(values_on.names)
    }
    bound = keyed.j_order + keyed.base_order + 2
    for _ in range(bound):
        new = solve_once(current)
        if all(new[n].terms == current[n].terms for n in new):
            return new
        current = new
    raise InternalInconsistency("inverse substitution did not stabilise")


class CoordinateChange:
    """Invertible, degree-preserving, centered change between two charts."""

    __slots__ = ("source", "target", "images", "inverse_images",
                 "base_loss", "j_loss")

    def __init__(self, source, target, images, inverse_images,
                 base_loss, j_loss, _token=None):
        if _token is not _PRIVATE:
            raise TypeError("use CoordinateChange.make()/from_inverse_images()")
        self.source = source
        self.target = target
        self.images = images
        self.inverse_images = inverse_images
        self.base_loss = base_loss
        self.j_loss = j_loss

    @classmethod
    def make(cls, source: ChartSpec, target: ChartSpec,
             images: Mapping[str, GradedSeries]) -> "CoordinateChange":
        """Build from forward images (target coordinates in source variables)."""
        _check_frames(source, target)
        _validate_images(images, target, source)
        images = {name: images[name] for name in target.names}
        inverse = _invert_map(images, target, source)
        flags = _loss_flags(images, inverse)
        return cls(source, target, images, inverse, *flags, _token=_PRIVATE)

    @classmethod
    def from_inverse_images(cls, source: ChartSpec, target: ChartSpec,
                            inverse_images: Mapping[str, GradedSeries]
                            ) -> "CoordinateChange":
        """Build from the other direction (source coordinates in target
        variables), as straightening steps naturally produce them."""
        _check_frames(source, target)
        _validate_images(inverse_images, source, target)
        inverse_images = {name: inverse_images[name] for name in source.names}
        images = _invert_map(inverse_images, source, target)
        flags = _loss_flags(images, inverse_images)
        return cls(source, target, images, inverse_images, *flags, _token=_PRIVATE)

    @classmethod
    def identity(cls, chart: ChartSpec) -> "CoordinateChange":
        ims = {name: chart.coordinate(name) for name in chart.names}
        return cls(chart, chart, dict(ims), dict(ims), False, False,
                   _token=_PRIVATE)


    def inverted(self) -> "CoordinateChange":
        return CoordinateChange(self.target, self.source,
                                dict(self.inverse_images), dict(self.images),
                                self.base_loss, self.j_loss, _token=_PRIVATE)

    def then(self, nxt: "CoordinateChange") -> "CoordinateChange":
        """Composite change: apply ``self`` first, then ``nxt``."""
        if self.target != nxt.source:
            raise ChartError("changes do not compose: chart mismatch")
        images = {
            w: compose(nxt.images[w], self.images, self.source)
            for w in nxt.target.names
        }
        inverse = {
            u: compose(self.inverse_images[u], nxt.inverse_images, nxt.target)
            for u in self.source.names
        }
        return CoordinateChange(
            self.source, nxt.target, images, inverse,
            self.base_loss or nxt.base_loss,
            self.j_loss or nxt.j_loss,
            _token=_PRIVATE,
        )

    def pull_back(self, f: GradedSeries) -> GradedSeries:
        """Series on the target chart, rewritten in source coordinates."""
        if f.chart != self.target:
            raise ChartError("series does not live on the target chart")
        return compose(f, self.images, self.source)

    def push_series(self, f: GradedSeries) -> GradedSeries:
        """Series on the source chart, rewritten in target coordinates."""
        if f.chart != self.source:
            raise ChartError("series does not live on the source chart")
        return compose(f, self.inverse_images, self.target)

    @property
    def is_identity(self) -> bool:
        if self.source != self.target:
            return False
        return all(
            self.images[name] == self.source.coordinate(name)
            for name in self.source.names
        )

    def truncated_to(self, source: ChartSpec, target: ChartSpec) -> "CoordinateChange":
        images = {n: s.truncated_to(source) for n, s in self.images.items()}
        inverse = {n: s.truncated_to(target) for n, s in self.inverse_images.items()}
        return CoordinateChange(source, target, images, inverse,
                                self.base_loss, self.j_loss, _token=_PRIVATE)

    def to_json_dict(self) -> dict:
        return {
            "change": {n: str(self.images[n]) for n in self.target.names},
            "inverse": {n: str(self.inverse_images[n]) for n in self.source.names},
            "truncation_loss": {"base": self.base_loss, "j": self.j_loss},
        }

    def __repr__(self) -> str:
        body = ", ".join(f"{n} -> {self.images[n]}" for n in self.target.names)
        return f"CoordinateChange({body})"


_PRIVATE = object()


def _loss_flags(images: Mapping[str, GradedSeries],
                inverse: Mapping[str, GradedSeries]) -> tuple[bool, bool]:
    series = list(images.values()) + list(inverse.values())
    return (any(s.base_loss for s in series), any(s.j_loss for s in series))


def substitute(f: GradedSeries, change: CoordinateChange) -> GradedSeries:
    """Formal composition of a target-chart series with the change."""
    return change.pull_back(f)


def invert_change(change: CoordinateChange) -> CoordinateChange:
    return change.inverted()


def compose_changes(first: CoordinateChange,
                    then: CoordinateChange) -> CoordinateChange:
    return first.then(then)


def pushforward(change: CoordinateChange, X: VectorField) -> VectorField:
    """Rewrite a source-chart field in the target coordinates via the chain
    rule: the new coefficient on v is X(image of v) expressed in target
    variables."""
    if X.chart != change.source:
        raise ChartError("field does not live on the source chart")
    out: dict[str, GradedSeries] = {}
    for v in change.target.names:
        w = X.apply(change.images[v])
        if w.is_zero:
            continue
        out[v] = compose(w, change.inverse_images, change.target)
    return VectorField(change.target, X.degree, out)
