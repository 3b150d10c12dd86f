"""Shared test utilities: standard charts, seeded random data, and the
brute-force transposition oracle for the product sign."""

from fractions import Fraction

from znfrob import (
    ChartSpec,
    CoordinateChange,
    DegreeVector,
    GradedSeries,
    Monomial,
    VectorField,
)


def standard_chart(j_order=4, base_order=6, extra_base=False):
    """n=2 chart with one coordinate per degree class (plus an optional
    second base coordinate)."""
    coords = [("x", (0, 0))]
    if extra_base:
        coords.append(("y", (0, 0)))
    coords += [("t1", (0, 1)), ("t2", (1, 0)), ("e", (1, 1))]
    return ChartSpec.build(2, coords, j_order=j_order, base_order=base_order)


def base_chart(names=("x", "y", "z"), j_order=2, base_order=4):
    return ChartSpec.build(1, [(n, (0,)) for n in names],
                           j_order=j_order, base_order=base_order)


def random_monomial(rng, chart, max_exp=2, max_j=None, max_base=None):
    """Uniform-ish sparse monomial inside the truncation window; optional
    caps keep test data away from the boundary where pipeline identities
    pick up truncation effects."""
    j_cap = chart.j_order if max_j is None else max_j
    base_cap = chart.base_order if max_base is None else max_base
    while True:
        exps = []
        for i in range(len(chart.names)):
            if chart.odd_flags[i]:
                exps.append(rng.randint(0, 1))
            else:
                exps.append(rng.choice([0] * 3 + list(range(1, max_exp + 1))))
        mon = Monomial(tuple(exps))
        if (mon.j_degree(chart) <= j_cap
                and mon.base_degree(chart) <= base_cap):
            return mon


def random_coefficient(rng):
    num = rng.randint(-4, 4)
    if num == 0:
        num = 1
    return Fraction(num, rng.randint(1, 3))


def random_series(rng, chart, degree=None, terms=3, allow_constant=True,
                  max_j=None, max_base=None):
    """Random series; homogeneous of the given degree when one is passed."""
    out = {}
    attempts = 0
    while len(out) < terms and attempts < 300:
        attempts += 1
        mon = random_monomial(rng, chart, max_j=max_j, max_base=max_base)
        if degree is not None and mon.degree(chart) != degree:
            continue
        if not allow_constant and mon.is_unit:
            continue
        out[mon] = random_coefficient(rng)
    return GradedSeries(chart, out, degree)


def random_degree(rng, n):
    return DegreeVector(tuple(rng.randint(0, 1) for _ in range(n)))


def random_field(rng, chart, degree=None, terms=2, max_j=None, max_base=None):
    """Random homogeneous field; coefficients are sparse random series."""
    if degree is None:
        degree = random_degree(rng, chart.n)
    coeffs = {}
    for name in chart.names:
        want = degree + chart.degree_of(name)
        count = rng.randint(0, terms)
        if count:
            s = random_series(rng, chart, degree=want, terms=count,
                              max_j=max_j, max_base=max_base)
            if not s.is_zero:
                coeffs[name] = s
    return VectorField(chart, degree, coeffs)


def boundary_only(field_or_series, chart):
    """True when every term sits on the truncation boundary."""
    from znfrob import GradedSeries, is_boundary_monomial
    if isinstance(field_or_series, GradedSeries):
        return all(is_boundary_monomial(m, chart)
                   for m in field_or_series.terms)
    return all(
        is_boundary_monomial(m, chart)
        for series in field_or_series.coefficients.values()
        for m in series.terms
    )


def random_centered_change(rng, chart, extra_terms=1, max_total=2,
                           mix_linear=True):
    """Identity plus sparse homogeneous corrections of total degree >= 2,
    with optional unit-triangular mixing inside each degree block."""
    images = {}
    for name in chart.names:
        img = chart.coordinate(name)
        deg = chart.degree_of(name)
        added = 0
        attempts = 0
        while added < extra_terms and attempts < 80:
            attempts += 1
            mon = random_monomial(rng, chart)
            if not 2 <= mon.total_degree <= max_total:
                continue
            if mon.degree(chart) != deg:
                continue
            coeff = rng.randint(-2, 2)
            if not coeff:
                continue
            img = img + GradedSeries(chart, {mon: Fraction(coeff)})
            added += 1
        images[name] = img
    if mix_linear:
        for i, u in enumerate(chart.names):
            for j, v in enumerate(chart.names):
                if i < j and chart.degrees[i] == chart.degrees[j]:
                    if rng.random() < 0.3:
                        images[v] = images[v] + chart.coordinate(u) * rng.randint(1, 2)
    return CoordinateChange.make(chart, chart, images)


def oracle_multiply_monomials(chart, m1, m2):
    """Reference product of two canonical monomials: expand into explicit
    letter sequences, bubble-sort into chart order accumulating the pairing
    sign per adjacent transposition, then apply the ring relations.

    Returns (monomial, sign) or (None, 0) when the product vanishes.
    """
    letters = []
    for i, e in enumerate(m1.exps):
        letters.extend([i] * e)
    for i, e in enumerate(m2.exps):
        letters.extend([i] * e)
    sign = 1
    changed = True
    while changed:
        changed = False
        for k in range(len(letters) - 1):
            a, b = letters[k], letters[k + 1]
            if a > b:
                letters[k], letters[k + 1] = b, a
                if chart.pair_table[a][b]:
                    sign = -sign
                changed = True
    exps = [0] * len(chart.names)
    for i in letters:
        exps[i] += 1
    for i, e in enumerate(exps):
        if chart.odd_flags[i] and e >= 2:
            return None, 0
    mon = Monomial(tuple(exps))
    if (mon.j_degree(chart) > chart.j_order
            or mon.base_degree(chart) > chart.base_order):
        return None, 0
    return mon, sign


def series_of(chart, text):
    from znfrob import parse_expression
    return parse_expression(text, chart)


def field_of(chart, degree_bits, coefficients):
    """Build a field from expression strings keyed by coordinate."""
    coeffs = {
        name: series_of(chart, expr) for name, expr in coefficients.items()
    }
    return VectorField(chart, DegreeVector(tuple(degree_bits)), coeffs)
