import pytest

from fermatlab.services.jets import (
    ANNIHILATION_RELATIONS,
    Divisor,
    Family,
    IncompatibleChart,
    JetId,
    JetPolynomial,
    SingularPoint,
    TruncationExhausted,
    annihilation_check,
    chart_curve,
    chart_surface,
    expand,
    lift_to_surface,
    order_entries,
    puiseux_branch,
    representation_consistency,
    sweep_exponents,
)
from fermatlab.services.series import LaurentSeries
from fermatlab.services.solutions import ParameterOutOfRange


@pytest.mark.parametrize("n", range(2, 8))
def test_curve_form_order_at_infinity(n):
    chart = chart_curve(Family.C_N, Divisor.INFINITY, (n,))
    assert chart.relation_residual() < 1e-12
    table = expand(JetId.PHI_CURVE, chart)
    assert table.overall_order == n - 3
    assert table.jd == "PHI_CURVE"
    assert table.divisor == "infinity"


@pytest.mark.parametrize("n", [2, 3, 5])
def test_logarithmic_form_on_curves(n):
    y0 = chart_curve(Family.C_N, Divisor.Y0, (n,))
    assert expand(JetId.ETA_CURVE, y0).overall_order == n - 2
    v0 = chart_curve(Family.C_N, Divisor.V0, (n,))
    assert expand(JetId.ETA_CURVE, v0, basis="log").overall_order == 0
    assert expand(JetId.ETA_CURVE, v0).overall_order == -1


@pytest.mark.parametrize("n", [7, 9])
def test_surface_orders(jet_analyzer, n):
    measured = jet_analyzer.measure(Family.S_N, (n,), seed=0)
    assert measured["omega_w0"] == n - 8
    assert measured["block_w0"] == -3
    assert measured["eta_z0"] == n - 6
    assert measured["eta_w0_log"] == 0
    assert measured["omega_x0"] >= 0


def test_surface_orders_do_not_depend_on_the_base_point(jet_analyzer):
    first = jet_analyzer.measure(Family.S_N, (8,), seed=0)
    for seed in (1, 2, 5):
        assert jet_analyzer.measure(Family.S_N, (8,), seed=seed) == first


@pytest.mark.parametrize("m, n, expected", [(6, 3, 2), (5, 4, 10), (7, 2, 4)])
def test_puiseux_branch_order(m, n, expected):
    germ = puiseux_branch(m, n)
    assert germ.residual() < 1e-10
    assert expand(JetId.PHI1_GEN, germ.chart()).overall_order == expected


def test_puiseux_branch_needs_distinct_exponents():
    with pytest.raises(ParameterOutOfRange):
        puiseux_branch(4, 4)


def test_infinity_chart_of_unequal_curve_is_singular():
    with pytest.raises(SingularPoint):
        chart_curve(Family.C_MN, Divisor.INFINITY, (5, 3))


def test_form_on_wrong_family_is_rejected():
    chart = chart_surface(Family.S_N, Divisor.W0, 0.3 + 0.2j, (6,))
    with pytest.raises(IncompatibleChart):
        expand(JetId.PHI_CURVE, chart)


@pytest.mark.parametrize(
    "jd, chart",
    [
        (JetId.PHI_CURVE, lambda: chart_curve(Family.C_N, Divisor.INFINITY, (5,))),
        (JetId.PSI_CURVE, lambda: chart_curve(Family.C_N, Divisor.Y0, (5,))),
        (JetId.PHI1_GEN, lambda: chart_curve(Family.C_MN, Divisor.X0, (5, 3))),
        (JetId.PHI_SURF, lambda: chart_surface(Family.S_N, Divisor.W0, 0.4 - 0.1j, (7,))),
        (JetId.PHI2_GEN, lambda: chart_surface(Family.S_MNL, Divisor.X0, 0.3 + 0.3j, (5, 4, 3))),
    ],
)
def test_cramer_representations_agree(jd, chart):
    assert representation_consistency(jd, chart()) <= 1e-9


@pytest.mark.parametrize("relation", [r for r in ANNIHILATION_RELATIONS if r != "generic"])
def test_annihilation_relations_vanish(relation):
    assert annihilation_check(relation, 5) <= 1e-10


def test_generic_germ_is_not_annihilated():
    assert annihilation_check("generic", 5) > 1e-3


def test_unknown_relation():
    with pytest.raises(ParameterOutOfRange):
        annihilation_check("x=y", 3)


def test_sweep_exponents():
    assert sweep_exponents(Family.C_N, (2, 4)) == [(2,), (3,), (4,)]
    assert len(sweep_exponents(Family.C_MN, (2, 4))) == 6
    assert (4, 3, 2) in sweep_exponents(Family.S_MNL, (2, 4))
    with pytest.raises(ParameterOutOfRange):
        sweep_exponents(Family.C_N, (5, 3))


def test_order_entries_refuse_an_uncertified_minimum():
    gens = ("ds", "d2s")
    zero = JetPolynomial.scalar(gens, LaurentSeries.from_coefficients([0.0, 0.0, 0.0]))
    with pytest.raises(TruncationExhausted):
        order_entries(zero)


def test_curve_threshold_sweep(jet_analyzer):
    report = jet_analyzer.threshold_verify(Family.C_N, exponent_range=(2, 6), include_tables=True)
    assert [row.exponents for row in report.rows] == [[n] for n in range(2, 7)]
    assert all(row.seed_agreement for row in report.rows)
    assert all(v.passed for v in report.verdicts), [v.predicate for v in report.verdicts if not v.passed]
    assert report.rows[0].tables


def test_general_curve_thresholds(jet_analyzer):
    report = jet_analyzer.threshold_verify(Family.C_MN, exponents=[(6, 3), (5, 4), (4, 4)], seeds=(0,))
    measured = {tuple(row.exponents): row.measurements["phi1_branch"] for row in report.rows}
    assert measured[(6, 3)] == 2
    assert measured[(5, 4)] == 10
    assert all(v.passed for v in report.verdicts)


def test_threshold_verify_needs_a_sweep(jet_analyzer):
    with pytest.raises(ParameterOutOfRange):
        jet_analyzer.threshold_verify(Family.C_N)


def test_surface_lift_of_an_affine_germ():
    u = LaurentSeries.from_coefficients([0.5, 1.0, 0.2], length=16)
    v = u * 0.7
    x, y, z, drift = lift_to_surface(u, v, 4)
    assert drift <= 1e-12
    w0 = (1 + 0.5 ** 4 + 0.35 ** 4) ** 0.25
    assert x.coefficient(0) == pytest.approx(0.5 / w0)
    assert z.coefficient(0) == pytest.approx(1 / w0)
    assert (x ** 4 + y ** 4 + z ** 4).coefficient(0) == pytest.approx(1.0)
