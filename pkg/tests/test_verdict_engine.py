import pytest

from fermatlab.models import (
    DefectEstimate,
    LemmaReport,
    NevanlinnaReport,
    NevanlinnaRow,
    ThresholdReport,
    ThresholdRow,
    VerifyReport,
)
from fermatlab.services.verdict_engine import VerdictEngine, all_passed


@pytest.fixture
def engine():
    return VerdictEngine()


def _by_predicate(verdicts):
    return {v.predicate: v for v in verdicts}


def _curve_rows(shift=0):
    rows = []
    for n in range(2, 8):
        rows.append(ThresholdRow(
            exponents=[n, n],
            measurements={
                "phi_infinity": n - 3 + shift,
                "eta_y0": n - 2,
                "eta_v0_log": 0,
            },
        ))
    return rows


def test_fermat_curve_table_passes(engine):
    report = ThresholdReport(family="Cn", seeds=[0, 1, 2], rows=_curve_rows())
    verdicts = engine.judge_thresholds(report)
    assert all_passed(verdicts)
    assert "PHI_CURVE.order.infinity=n-3" in _by_predicate(verdicts)
    assert "TABLES.seed_invariant" in _by_predicate(verdicts)


def test_fermat_curve_table_detects_wrong_order(engine):
    report = ThresholdReport(family="Cn", seeds=[0], rows=_curve_rows(shift=1))
    verdicts = _by_predicate(engine.judge_thresholds(report))
    assert not verdicts["PHI_CURVE.order.infinity=n-3"].passed
    assert not verdicts["PHI_CURVE.holomorphic.n>=3"].passed
    assert verdicts["ETA_CURVE.order.Y0=n-2"].passed


def test_seed_drift_fails(engine):
    rows = _curve_rows()
    rows[2].seed_agreement = False
    verdicts = _by_predicate(engine.judge_thresholds(ThresholdReport(family="Cn", rows=rows)))
    assert not verdicts["TABLES.seed_invariant"].passed
    assert "(4,4)" in verdicts["TABLES.seed_invariant"].signals


def test_unknown_family_is_rejected(engine):
    with pytest.raises(ValueError):
        engine.judge_thresholds(ThresholdReport(family="Xn"))
    with pytest.raises(ValueError):
        engine.judge_bookkeeping("Cn", [[3, 3]])


def test_bookkeeping_sweeps(engine):
    curves = [[m, n] for m in range(2, 13) for n in range(2, 13)]
    surfaces = [[m, n, l] for m in range(2, 13) for n in range(m, 13) for l in range(n, 13)]
    assert all_passed(engine.judge_bookkeeping("Cmn", curves))
    assert all_passed(engine.judge_bookkeeping("Smnl", surfaces))


def test_bookkeeping_uses_exact_fractions(engine):
    # 1/3 + 1/3 = 2/3 sits exactly on the cap
    verdicts = _by_predicate(engine.judge_bookkeeping("Cmn", [[3, 3]]))
    assert verdicts["EXPONENTS.1/m+1/n<=2/3=>max>=3"].passed


def test_verify_verdict(engine):
    good = VerifyReport(samples=10, accepted=10, max_residual=1e-12, max_abs_residual=1e-12,
                        skipped_near_pole=0, tolerance=1e-9)
    bad = good.model_copy(update={"max_residual": 1e-6})
    empty = good.model_copy(update={"accepted": 0, "max_residual": 0.0})
    assert engine.judge_verify(good, "K3N2_H").passed
    assert engine.judge_verify(good, "K3N2_H").predicate == "K3N2_H.residual<=tol"
    assert not engine.judge_verify(bad, "K3N2_H").passed
    assert not engine.judge_verify(empty, "K3N2_H").passed


def test_annihilation_and_control(engine):
    assert engine.judge_annihilation("y=ax", 1e-13).passed
    assert not engine.judge_annihilation("y=ax", 1e-4).passed
    control = engine.judge_annihilation("generic", 0.5)
    assert control.predicate == "ANNIHILATION.control_nonzero"
    assert control.passed
    assert not engine.judge_annihilation("generic", 1e-9).passed


def test_consistency(engine):
    assert engine.judge_consistency("PHI_CURVE", 1e-12).passed
    assert not engine.judge_consistency("PHI_CURVE", 1e-3).passed


def test_nevanlinna_report_verdicts(engine):
    report = NevanlinnaReport(
        function="z",
        surface="C",
        rows=[
            NevanlinnaRow(r=2.0, T=0.80, m=0.1, N=0.7, fmt_residual=0.0, growth_ratio=0.0),
            NevanlinnaRow(r=4.0, T=1.42, m=0.1, N=1.3, fmt_residual=0.02, growth_ratio=0.0),
        ],
        defects=[DefectEstimate(schedule=[2, 4], ratios=[0.9, 0.95], value=0.05)],
        fmt_bound=0.5,
    )
    verdicts = _by_predicate(engine.judge_nevanlinna(report))
    assert verdicts["NEVANLINNA.nonnegative"].passed
    assert verdicts["NEVANLINNA.T_nondecreasing"].passed
    assert verdicts["FMT.bounded"].passed
    assert verdicts["DEFECT.range"].passed
    assert verdicts["GROWTH.ratio=0"].passed


def test_nevanlinna_report_catches_decreasing_characteristic(engine):
    report = NevanlinnaReport(
        function="z",
        surface="C",
        rows=[NevanlinnaRow(r=2.0, T=1.0), NevanlinnaRow(r=4.0, T=0.5)],
    )
    verdicts = _by_predicate(engine.judge_nevanlinna(report))
    assert not verdicts["NEVANLINNA.T_nondecreasing"].passed


def test_lemma_and_power_verdicts(engine):
    lemma = LemmaReport(case="a", members=[0, 1, 2], truncation=2, syzygy_residual=0.0,
                        defect_sum=1.1, bound=2.0, margin=0.9, cramer_residual=1e-12)
    report = NevanlinnaReport(function="exp-syzygy", surface="C", lemma=lemma, check="lemma52")
    verdicts = _by_predicate(engine.judge_nevanlinna(report))
    assert verdicts["LEMMA.defect_sum<=2"].passed
    assert verdicts["LEMMA.cramer_identity"].passed

    power = NevanlinnaReport(
        function="z^3",
        surface="C",
        check="power",
        power=3,
        defects=[DefectEstimate(truncation=1, schedule=[8, 12], ratios=[0.33, 0.33], value=0.67)],
    )
    verdicts = _by_predicate(engine.judge_nevanlinna(power))
    assert verdicts["POWER.delta[1](f^3,0)>=1-1/3"].passed
