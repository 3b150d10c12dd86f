import random

import pytest

from helpers import (
    base_chart,
    field_of,
    random_centered_change,
    series_of,
    standard_chart,
)
from znfrob import (
    ChartSpec,
    DegenerateAtPoint,
    Distribution,
    NonzeroDegree,
    NotCommuting,
    NotInvolutive,
    OddSquareNonzero,
    VectorField,
    ZeroDegree,
    adapted_coordinates,
    commuting_triangular,
    pushforward,
    straighten_deg0,
    straighten_nonzero,
    verify_adapted,
)
from znfrob.frobenius import FrobeniusCertificate


def dgen(chart, name):
    return VectorField.coordinate_derivation(chart, name)


def ze_chart(j_order=4, base_order=4):
    return ChartSpec.build(2, [("z", (0, 0)), ("e", (1, 1))],
                           j_order=j_order, base_order=base_order)


def zt_chart(j_order=4, base_order=3):
    return ChartSpec.build(2, [("z", (0, 0)), ("t1", (0, 1))],
                           j_order=j_order, base_order=base_order)


# -- degree-zero straightening -------------------------------------------------

def test_deg0_identity():
    chart = ze_chart()
    change = straighten_deg0(dgen(chart, "z"))
    assert change.is_identity


def test_deg0_exponential_witness():
    chart = ze_chart(base_order=4)
    X = field_of(chart, (0, 0), {"z": "1", "e": "e"})
    change = straighten_deg0(X)
    want = series_of(chart, "1 - z + 1/2*z^2 - 1/6*z^3 + 1/24*z^4")
    assert change.images["z"] == chart.coordinate("z")
    assert change.images["e"] == want * chart.coordinate("e")
    assert change.base_loss
    Y = pushforward(change, X)
    assert Y.coefficient("z") == chart.one()
    # leftover only at the flagged base boundary
    leftover = Y.coefficient("e")
    assert all(m.base_degree(chart) >= chart.base_order for m in leftover.terms)


def test_deg0_formal_log_witness():
    chart = ze_chart(base_order=5)
    X = field_of(chart, (0, 0), {"z": "1 + z"})
    change = straighten_deg0(X)
    want = series_of(chart, "z - 1/2*z^2 + 1/3*z^3 - 1/4*z^4 + 1/5*z^5")
    assert change.images["z"] == want
    Y = pushforward(change, X)
    err = Y.coefficient("z") - chart.one()
    assert all(m.base_degree(chart) >= chart.base_order for m in err.terms)


def test_deg0_degenerate_and_wrong_degree():
    chart = ze_chart()
    with pytest.raises(DegenerateAtPoint):
        straighten_deg0(field_of(chart, (0, 0), {"e": "e"}))
    with pytest.raises(NonzeroDegree):
        straighten_deg0(dgen(chart, "e"))


def test_deg0_linear_mixing():
    chart = base_chart(("x", "y"), j_order=2, base_order=4)
    X = field_of(chart, (0,), {"x": "1", "y": "1"})
    change = straighten_deg0(X)
    Y = pushforward(change, X)
    assert Y == dgen(chart, "x")


# -- nonzero-degree straightening ----------------------------------------------

def test_odd_geometric_witness():
    chart = zt_chart(base_order=3)
    chi = field_of(chart, (0, 1), {"t1": "1 + z"})
    change = straighten_nonzero(chi)
    assert change.images["t1"] == series_of(chart, "(1 - z + z^2 - z^3)*t1")
    assert pushforward(change, chi) == dgen(chart, "t1")
    assert not change.base_loss and not change.j_loss


def test_odd_square_nonzero_rejected():
    chart = zt_chart()
    chi = field_of(chart, (0, 1), {"t1": "1", "z": "t1"})
    with pytest.raises(OddSquareNonzero):
        straighten_nonzero(chi)


def test_even_single_iteration_witness():
    chart = ze_chart()
    chi = field_of(chart, (1, 1), {"e": "1", "z": "e"})
    change = straighten_nonzero(chi)
    assert change.images["z"] == series_of(chart, "z - 1/2*e^2")
    assert change.images["e"] == chart.coordinate("e")
    assert pushforward(change, chi) == dgen(chart, "e")


def test_nonzero_idempotent_and_errors():
    chart = ze_chart()
    assert straighten_nonzero(dgen(chart, "e")).is_identity
    with pytest.raises(ZeroDegree):
        straighten_nonzero(dgen(chart, "z"))
    with pytest.raises(DegenerateAtPoint):
        straighten_nonzero(field_of(chart, (1, 1), {"e": "z"}))


def test_even_straightening_random():
    from znfrob import is_boundary_monomial
    rng = random.Random(67)
    chart = standard_chart(j_order=4, base_order=4)
    for _ in range(5):
        sigma = random_centered_change(rng, chart)
        chi = pushforward(sigma, dgen(chart, "e"))
        change = straighten_nonzero(chi)
        Y = pushforward(change, chi)
        for name in chart.names:
            got = Y.coefficient(name)
            want = chart.one() if name == "e" else chart.zero()
            diff = got - want
            assert all(is_boundary_monomial(m, chart) for m in diff.terms)


# -- commuting triangular families ----------------------------------------------

def test_triangular_identity():
    chart = base_chart(("x", "y"), j_order=2, base_order=4)
    change = commuting_triangular([dgen(chart, "x"), dgen(chart, "y")])
    assert change.is_identity


def test_triangular_linear_family():
    chart = base_chart(("x", "y"), j_order=2, base_order=4)
    X1 = field_of(chart, (0,), {"x": "1", "y": "1"})
    X2 = dgen(chart, "y")
    change = commuting_triangular([X1, X2])
    Y1 = pushforward(change, X1)
    Y2 = pushforward(change, X2)
    # triangular over the pivots: spans of {Y1, Y2} = span{dx, dy}
    assert Y1.coefficient("x") == chart.one()
    assert Y2.coefficient("x").is_zero or Y2.coefficient("x").constant_term == 0
    assert Y2.coefficient("y").constant_term != 0


def test_triangular_not_commuting():
    chart = base_chart()
    X = dgen(chart, "x")
    Y = field_of(chart, (0,), {"y": "1", "z": "x"})
    with pytest.raises(NotCommuting) as exc:
        commuting_triangular([X, Y])
    assert exc.value.pair == (0, 1)


def test_triangular_dependent_family():
    chart = base_chart(("x", "y"))
    X = dgen(chart, "x")
    with pytest.raises(DegenerateAtPoint):
        commuting_triangular([X, X.scaled_by(chart.constant(2))])


def test_triangular_wrong_degree():
    chart = standard_chart()
    with pytest.raises(NonzeroDegree):
        commuting_triangular([dgen(chart, "t1")])


# -- full pipeline ----------------------------------------------------------------

def test_adapted_identity_case():
    chart = standard_chart(j_order=3, base_order=4)
    D = Distribution(chart, [dgen(chart, "x"), dgen(chart, "t1")])
    cert = adapted_coordinates(D)
    assert cert.change.is_identity
    assert cert.adapted == ("x", "t1")
    assert not cert.residuals
    assert verify_adapted(D, cert).ok


def test_adapted_mixed_degree_generator():
    chart = standard_chart(j_order=4, base_order=6)
    X = field_of(chart, (0, 0), {"x": "1", "e": "t1*t2"})
    D = Distribution(chart, [X])
    cert = adapted_coordinates(D)
    assert cert.adapted == ("x",)
    assert cert.change.images["e"] == series_of(chart, "e - x*t1*t2")
    assert verify_adapted(D, cert).ok
    assert not cert.residuals


def test_adapted_rejects_noninvolutive():
    chart = base_chart()
    X = field_of(chart, (0,), {"x": "1", "z": "y"})
    Y = field_of(chart, (0,), {"y": "1"})
    with pytest.raises(NotInvolutive) as exc:
        adapted_coordinates(Distribution(chart, [X, Y]))
    witness = exc.value.witness
    assert witness.witness_pair == (0, 1)


def test_adapted_rank_zero():
    chart = standard_chart()
    cert = adapted_coordinates(Distribution(chart, []))
    assert cert.change.is_identity
    assert cert.adapted == ()


def test_adapted_full_rank_mixed():
    chart = standard_chart(j_order=3, base_order=4)
    D = Distribution(chart, [
        field_of(chart, (0, 0), {"x": "1", "e": "t1*t2"}),
        field_of(chart, (0, 1), {"t1": "1", "e": "x*t2"}),
    ])
    cert = adapted_coordinates(D)
    assert set(cert.adapted) == {"x", "t1"}
    report = verify_adapted(D, cert)
    assert report.ok and report.rank_ok and report.reverse_ok


def test_verify_rejects_perturbed_certificate():
    chart = standard_chart(j_order=4, base_order=6)
    X = field_of(chart, (0, 0), {"x": "1", "e": "t1*t2"})
    D = Distribution(chart, [X])
    cert = adapted_coordinates(D)
    # perturb the image of e by a J-degree-1 term
    from znfrob import CoordinateChange
    images = dict(cert.change.images)
    images["e"] = images["e"] + chart.coordinate("e")
    broken = CoordinateChange.make(chart, chart, images)
    bad_cert = FrobeniusCertificate(change=broken, adapted=cert.adapted,
                                    residuals=(), steps=())
    report = verify_adapted(D, bad_cert)
    assert not report.ok


def test_verify_identity_certificate_single_derivation():
    chart = standard_chart()
    D = Distribution(chart, [dgen(chart, "x")])
    from znfrob import CoordinateChange
    cert = FrobeniusCertificate(
        change=CoordinateChange.identity(chart),
        adapted=("x",), residuals=(), steps=())
    assert verify_adapted(D, cert).ok


def test_monotone_corrections():
    # each correction step only moves coordinates by terms of J-degree >= k
    chart = standard_chart(j_order=4, base_order=4)
    rng = random.Random(71)
    sigma = random_centered_change(rng, chart)
    X = pushforward(sigma, dgen(chart, "x"))
    from znfrob.frobenius import _straighten_deg0_steps
    steps, _, _ = _straighten_deg0_steps(X)
    last = 1
    for label, step in steps:
        if not label.startswith("j_correction_"):
            continue
        k = int(label.rsplit("_", 1)[1])
        assert k >= last
        last = k
        for name in chart.names:
            diff = step.images[name] - chart.coordinate(name)
            for m in diff.terms:
                assert m.j_degree(chart) >= k


def test_odd_straightening_with_same_degree_mixing():
    # two odd coordinates of equal degree: the pivot frame must absorb the
    # constant mixing column
    chart = ChartSpec.build(2, [("z", (0, 0)), ("ta", (0, 1)), ("tb", (0, 1))],
                            j_order=3, base_order=3)
    chi = field_of(chart, (0, 1), {"ta": "1", "tb": "1"})
    change = straighten_nonzero(chi)
    assert pushforward(change, chi) == dgen(chart, "ta")
    assert change.images["tb"] == series_of(chart, "tb - ta")


def test_even_straightening_with_same_degree_mixing():
    chart = ChartSpec.build(2, [("z", (0, 0)), ("e1", (1, 1)), ("e2", (1, 1))],
                            j_order=4, base_order=4)
    chi = field_of(chart, (1, 1), {"e1": "1", "e2": "z"})
    change = straighten_nonzero(chi)
    assert pushforward(change, chi) == dgen(chart, "e1")


def test_adapted_same_degree_odd_pair():
    chart = ChartSpec.build(2, [("x", (0, 0)), ("ta", (0, 1)), ("tb", (0, 1))],
                            j_order=3, base_order=3)
    D = Distribution(chart, [
        field_of(chart, (0, 1), {"ta": "1", "tb": "x"}),
        field_of(chart, (0, 1), {"tb": "1"}),
    ])
    cert = adapted_coordinates(D)
    assert set(cert.adapted) == {"ta", "tb"}
    assert verify_adapted(D, cert).ok


def test_certificate_truncation_coherence_full_pipeline():
    high = standard_chart(j_order=4, base_order=4, extra_base=True)
    low = standard_chart(j_order=3, base_order=4, extra_base=True)
    rng = random.Random(555)
    subsets = [("x",), ("x", "t1"), ("e",), ("x", "y", "e"), ("t1", "e")]
    for i in range(5):
        sigma = random_centered_change(rng, high)
        names = subsets[i % len(subsets)]
        gens_high = [
            pushforward(sigma, VectorField.coordinate_derivation(high, u))
            for u in names
        ]
        gens_low = [g.truncated_to(low) for g in gens_high]
        c_high = adapted_coordinates(Distribution(high, gens_high))
        c_low = adapted_coordinates(Distribution(low, gens_low))
        assert c_high.adapted == c_low.adapted
        for name in high.names:
            assert c_high.change.images[name].truncated_to(low) \
                == c_low.change.images[name], (i, name)
            assert c_high.change.inverse_images[name].truncated_to(low) \
                == c_low.change.inverse_images[name], (i, name)


def test_adapted_random_soundness_small():
    rng = random.Random(73)
    chart = standard_chart(j_order=3, base_order=3)
    subsets = [("x",), ("x", "t1"), ("t1",), ("e",), ("x", "e"),
               ("x", "t1", "e")]
    for i in range(6):
        sigma = random_centered_change(rng, chart)
        names = subsets[i % len(subsets)]
        gens = [pushforward(sigma, dgen(chart, n)) for n in names]
        D = Distribution(chart, gens)
        cert = adapted_coordinates(D)
        assert verify_adapted(D, cert).ok
        assert len(cert.adapted) == len(names)
