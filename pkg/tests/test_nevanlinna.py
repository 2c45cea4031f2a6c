import math

import numpy as np
import pytest

from fermatlab.models import NevanlinnaRow, QuadratureConfig
from fermatlab.services.expr_core import PoleAtBasePoint, Z, as_expr, exp
from fermatlab.services.nevanlinna import (
    APointAtOrigin,
    ComplexPlane,
    LinearlyDependent,
    NevanlinnaAnalyzer,
    NotASyzygy,
    OutsideDisc,
    PoincareDisc,
    QuadratureBudgetExceeded,
    ZeroPoleList,
    builtin_functions,
    builtin_tuples,
    fmt_growth_flag,
    green,
    surface_for,
)
from fermatlab.services.verdict_engine import VerdictEngine, all_passed

PLANE = ComplexPlane()
DISC = PoincareDisc()


# Surfaces and Green functions

def test_green_function_on_the_plane():
    assert green(PLANE, 2.0, 1.0) == pytest.approx(math.log(2) / math.pi)
    assert green(PLANE, 2.0, 2.0) == 0.0
    with pytest.raises(PoleAtBasePoint):
        green(PLANE, 2.0, 0.0)
    with pytest.raises(OutsideDisc):
        green(PLANE, 2.0, 3.0)


def test_green_function_on_the_disc():
    R = math.tanh(1.0)
    assert green(DISC, 2.0, 0.5 * R) == pytest.approx(math.log(2) / math.pi)
    with pytest.raises(OutsideDisc):
        green(DISC, 2.0, 0.9)
    with pytest.raises(PoleAtBasePoint):
        green(DISC, 2.0, 0j)


def test_surface_lookup():
    assert surface_for("C") == PLANE
    assert surface_for("D") == DISC
    assert DISC.kappa(1.0) == -1.0
    assert DISC.metric_density(0.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        surface_for("H")


# Characteristic functions

def test_characteristic_of_identity(analyzer):
    assert analyzer.char_T(Z, PLANE, 3.0) == pytest.approx(0.5 * math.log(10), rel=1e-2)
    assert analyzer.char_T(Z, PLANE, 3.0, method="boundary") == pytest.approx(0.5 * math.log(10), rel=1e-6)


def test_characteristic_on_the_disc(analyzer):
    R = math.tanh(1.0)
    assert analyzer.char_T(Z, DISC, 2.0) == pytest.approx(0.5 * math.log(1 + R * R), rel=1e-4)


def test_characteristic_is_nondecreasing(analyzer):
    values = [analyzer.char_T(exp(Z), PLANE, r) for r in (1.0, 2.0, 4.0)]
    assert values == sorted(values)
    # T(r, e^z) = r/pi + O(1)
    assert values[2] - values[1] == pytest.approx(2.0 / math.pi, abs=0.1)


def test_characteristic_with_pole_list(analyzer):
    f = 1 / (Z - 0.5)
    poles = ZeroPoleList.of([0.5])
    area = analyzer.char_T(f, PLANE, 2.0)
    boundary = analyzer.char_T(f, PLANE, 2.0, method="boundary", poles=poles)
    assert boundary == pytest.approx(area, rel=1e-2)


def test_multi_characteristic_reduces_to_single(analyzer):
    single = analyzer.char_T(Z, PLANE, 3.0)
    assert analyzer.char_multi([Z], PLANE, 3.0) == pytest.approx(single, rel=1e-9)
    assert analyzer.char_multi([Z, Z * Z], PLANE, 3.0) > single


def test_projective_characteristic(analyzer):
    assert analyzer.char_projective([as_expr(1.0), Z], PLANE, 3.0) == pytest.approx(0.5 * math.log(10), rel=1e-6)


def test_quadrature_budget():
    tight = NevanlinnaAnalyzer(QuadratureConfig(max_evaluations=1000))
    with pytest.raises(QuadratureBudgetExceeded):
        tight.char_T(Z, PLANE, 3.0)


# Counting and proximity

def test_counting_function(analyzer):
    points = ZeroPoleList.of([0.5])
    assert analyzer.counting_N(points, PLANE, 2.0) == pytest.approx(math.log(4))
    triple = ZeroPoleList.of([0.5, 3.0], [3, 1])
    assert analyzer.counting_N(triple, PLANE, 2.0) == pytest.approx(3 * math.log(4))
    assert analyzer.counting_N(triple, PLANE, 2.0, truncation=1) == pytest.approx(math.log(4))
    with pytest.raises(APointAtOrigin):
        analyzer.counting_N(ZeroPoleList.of([0.0]), PLANE, 2.0)


def test_zero_pole_list_validation():
    with pytest.raises(ValueError):
        ZeroPoleList((0.5,), ())
    with pytest.raises(ValueError):
        ZeroPoleList.of([0.5], [0])
    assert ZeroPoleList.of([0.5, 0.7], [1, 2]).scaled(3).multiplicities == (3, 6)


def test_proximity_at_infinity(analyzer):
    assert analyzer.proximity_m(Z, None, PLANE, math.e) == pytest.approx(1.0)
    assert analyzer.proximity_m(Z, 0.5, PLANE, 2.0) == pytest.approx(0.0, abs=1e-12)


# a-points

def test_locate_simple_zero(analyzer):
    points = analyzer.locate_a_points(Z - 0.5, 0.0, PLANE, 1.0)
    assert len(points) == 1
    assert points.points[0] == pytest.approx(0.5, abs=1e-12)
    assert points.multiplicities == (1,)
    assert points.provenance == "argument-principle"


def test_locate_double_zero(analyzer):
    points = analyzer.locate_a_points((Z - 0.3) ** 2, 0.0, PLANE, 1.0)
    assert points.multiplicities == (2,)
    assert points.points[0] == pytest.approx(0.3, abs=1e-8)


def test_locate_a_points_of_a_value(analyzer):
    points = analyzer.locate_a_points(Z * Z, 0.25, PLANE, 1.0)
    assert sorted(p.real for p in points.points) == pytest.approx([-0.5, 0.5], abs=1e-12)


def test_zero_free_function_has_no_a_points(analyzer):
    assert len(analyzer.locate_a_points(exp(Z), 0.0, PLANE, 3.0)) == 0


def test_zeros_of_shifted_exponential(analyzer):
    points = analyzer.locate_a_points(exp(Z), 1.0, PLANE, 7.0)
    found = sorted(points.points, key=lambda z: z.imag)
    np.testing.assert_allclose(found, [-2j * math.pi, 0.0, 2j * math.pi], atol=1e-10)
    assert points.multiplicities == (1, 1, 1)


def test_subdivision_continues_when_newton_fails(analyzer, monkeypatch):
    monkeypatch.setattr(NevanlinnaAnalyzer, "_newton", staticmethod(lambda h, z, multiplicity, steps=60: None))
    points = analyzer.locate_a_points(Z - 0.5, 0.0, PLANE, 1.0)
    assert points.multiplicities == (1,)
    assert points.points[0] == pytest.approx(0.5, abs=2e-8)


# First Main Theorem and defects

@pytest.mark.parametrize("f, a", [(Z, 0.5), (exp(Z), 2.0), (Z * Z, 0.3)])
def test_first_main_theorem_residual_stays_bounded(analyzer, f, a):
    report = analyzer.report(f, PLANE, [2.0, 4.0, 8.0], a=a)
    assert not report.growth_flag
    assert report.fmt_bound < 1.5
    assert all(row.N is not None for row in report.rows)
    verdicts = {v.predicate: v for v in VerdictEngine().judge_nevanlinna(report)}
    assert verdicts["FMT.bounded"].passed


def test_report_with_four_radii_carries_a_defect(analyzer):
    report = analyzer.report(Z, PLANE, [2.0, 4.0, 6.0, 8.0], a=0.5, truncation=1)
    assert len(report.defects) == 1
    assert 0.0 <= report.defects[0].value <= 1.0
    assert report.rows[0].N_truncated == pytest.approx(report.rows[0].N)


def test_defect_schedule_needs_four_radii(analyzer):
    with pytest.raises(ValueError):
        analyzer.defect_estimate(Z, 0.0, None, schedule=[2.0, 4.0])


def test_power_rule(analyzer):
    f = builtin_functions()["power-test"]
    report = analyzer.power_rule_check(f, 3)
    assert report.check == "power"
    assert [d.truncation for d in report.defects] == [1, 2]
    assert all_passed(VerdictEngine().judge_nevanlinna(report))


def test_small_function_defect(analyzer):
    tuples = builtin_tuples()
    report = analyzer.small_function_check(tuples["small-functions"], tuples["small-functions-f"])
    assert [d.value for d in report.defects] == [1.0, 1.0]
    assert all_passed(VerdictEngine().judge_nevanlinna(report))


def test_fmt_growth_flag():
    flat = [NevanlinnaRow(r=2, T=1.0, fmt_residual=0.3), NevanlinnaRow(r=8, T=3.0, fmt_residual=0.4)]
    rising = [NevanlinnaRow(r=2, T=1.0, fmt_residual=0.3), NevanlinnaRow(r=8, T=3.0, fmt_residual=2.0)]
    assert not fmt_growth_flag(flat, 0.5)
    assert fmt_growth_flag(rising, 0.5)


# Growth ratio

def test_growth_ratio(analyzer):
    assert analyzer.growth_ratio([Z], PLANE, 3.0) == 0.0
    assert analyzer.growth_ratio([Z], DISC, 2.0) < 0.0


# Wronskians and the defect inequality

def test_wronskians(analyzer):
    assert analyzer.wronskian_value([exp(Z), exp(2 * Z)], 0.0) == pytest.approx(1.0)
    assert analyzer.wronskian_value([Z, Z ** 2, Z ** 3], 1.0) == pytest.approx(2.0)
    assert analyzer.wronskian_value([exp(Z), 2 * exp(Z)], 0.4) == pytest.approx(0.0, abs=1e-12)


def test_minimal_circuit(analyzer):
    members, coeffs = analyzer.minimal_circuit([exp(Z), Z, 2 * exp(Z)], 0.3)
    assert members == [0, 2]
    assert abs(coeffs[0] * 1 + coeffs[1] * 2) < 1e-12


def test_builtin_tuples_are_syzygies(analyzer):
    tuples = builtin_tuples()
    assert analyzer.syzygy_residual(tuples["exp-syzygy"]) < 1e-12
    assert analyzer.syzygy_residual(tuples["exp-dependent"]) < 1e-12


def test_defect_inequality_for_independent_family(analyzer):
    lemma = analyzer.lemma_defect_check(builtin_tuples()["exp-syzygy"])
    assert lemma.case == "a"
    assert lemma.truncation == 2
    assert lemma.defect_sum <= 2.05
    assert lemma.cramer_residual <= 1e-8


def test_defect_inequality_for_dependent_family(analyzer):
    lemma = analyzer.lemma_defect_check(builtin_tuples()["exp-dependent"])
    assert lemma.case == "b"
    assert len(lemma.members) == 2
    assert lemma.bound == 1.0
    assert lemma.defect_sum <= 1.05


def test_defect_inequality_rejects_bad_families(analyzer):
    with pytest.raises(NotASyzygy):
        analyzer.lemma_defect_check([Z, Z])
    with pytest.raises(LinearlyDependent):
        analyzer.lemma_defect_check([as_expr(1.0), as_expr(-1.0)])
    with pytest.raises(APointAtOrigin):
        analyzer.lemma_defect_check(builtin_tuples()["exp-syzygy"], surface=DISC)


def test_logarithmic_derivative_bound(analyzer):
    report = analyzer.logderiv_check(exp(Z), 1)
    assert report.violations == 0
    assert [row.r for row in report.rows] == [2.0, 4.0, 6.0, 8.0]
    assert all(row.m == pytest.approx(0.0, abs=1e-12) for row in report.rows)
