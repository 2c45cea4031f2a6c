"""
Verdict Engine - Deterministic, Transparent, Explainable
Every verdict carries the numbers it was decided on and the rule that decided it.
"""
import logging
from fractions import Fraction
from typing import Callable, List, Optional, Sequence

from fermatlab.models import NevanlinnaReport, ThresholdReport, ThresholdRow, Verdict, VerifyReport

logger = logging.getLogger(__name__)

ESTIMATOR_NOISE = 0.05
CONSISTENCY_TOL = 1e-9
ANNIHILATION_TOL = 1e-10
CONTROL_FLOOR = 1e-3
CRAMER_TOL = 1e-8

Measure = Callable[[ThresholdRow], Optional[int]]


class VerdictEngine:
    """Judge computed numbers against the stated predicates"""

    def __init__(self):
        logger.info("[INFO] VerdictEngine initialized")

    # Order tables

    def judge_thresholds(self, report: ThresholdReport) -> List[Verdict]:
        """All predicates for the family of the report, plus seed invariance"""
        judges = {
            "Cn": self._judge_fermat_curve,
            "Sn": self._judge_fermat_surface,
            "Cmn": self._judge_general_curve,
            "Smnl": self._judge_general_surface,
        }
        judge = judges.get(report.family)
        if judge is None:
            raise ValueError(f"no threshold predicates for family {report.family!r}")
        verdicts = judge(report.rows)
        verdicts.append(self._seed_invariance(report))
        return verdicts

    def _judge_fermat_curve(self, rows: Sequence[ThresholdRow]) -> List[Verdict]:
        phi = _get("phi_infinity")
        eta_y0 = _get("eta_y0")
        eta_log = _min_of("eta_v0_log", "eta_y0")
        n = lambda row: row.exponents[0]
        return [
            self._exact("PHI_CURVE.order.infinity=n-3", rows, phi, lambda row: n(row) - 3, "ord_inf(Phi) = n - 3"),
            self._iff("PHI_CURVE.holomorphic.n>=3", rows, phi, 0, lambda row: n(row) >= 3,
                      "ord_inf(Phi) >= 0 <=> n >= 3"),
            self._iff("PHI_CURVE.vanish.n>=4", rows, phi, 1, lambda row: n(row) >= 4,
                      "ord_inf(Phi) >= 1 <=> n >= 4"),
            self._iff("ETA_CURVE.log.n>=2", rows, eta_log, 0, lambda row: n(row) >= 2,
                      "min(ord_V0^log(eta), ord_Y0(eta)) >= 0 <=> n >= 2"),
            self._iff("ETA_CURVE.vanish.Y0.n>=3", rows, eta_y0, 1, lambda row: n(row) >= 3,
                      "ord_Y0(eta) >= 1 <=> n >= 3"),
            self._exact("ETA_CURVE.order.Y0=n-2", rows, eta_y0, lambda row: n(row) - 2, "ord_Y0(eta) = n - 2"),
        ]

    def _judge_fermat_surface(self, rows: Sequence[ThresholdRow]) -> List[Verdict]:
        omega = _get("omega_w0")
        eta_log = _min_of("eta_w0_log", "eta_z0")
        eta_z0 = _get("eta_z0")
        n = lambda row: row.exponents[0]
        return [
            self._exact("OMEGA_SURF.order.W0=n-8", rows, omega, lambda row: n(row) - 8, "ord_W0(omega) = n - 8"),
            self._iff("OMEGA_SURF.holomorphic.n>=8", rows, omega, 0, lambda row: n(row) >= 8,
                      "ord_W0(omega) >= 0 <=> n >= 8"),
            self._iff("OMEGA_SURF.vanish.n>=9", rows, omega, 1, lambda row: n(row) >= 9,
                      "ord_W0(omega) >= 1 <=> n >= 9"),
            self._bound("BLOCK_SURF.pole<=4", rows, _get("block_w0"), -4, "ord_W0(dx d2y - dy d2x) >= -4"),
            self._bound("OMEGA_SURF.affine.X0", rows, _get("omega_x0"), 0, "ord_X0(omega) >= 0"),
            self._iff("ETA_SURF.log.n>=6", rows, eta_log, 0, lambda row: n(row) >= 6,
                      "min(ord_W0^log(eta), ord_Z0(eta)) >= 0 <=> n >= 6"),
            self._iff("ETA_SURF.vanish.Z0.n>=7", rows, eta_z0, 1, lambda row: n(row) >= 7,
                      "ord_Z0(eta) >= 1 <=> n >= 7"),
        ]

    def _judge_general_curve(self, rows: Sequence[ThresholdRow]) -> List[Verdict]:
        branch = _get("phi1_branch")
        harmonic = lambda row: sum(Fraction(1, e) for e in row.exponents)
        return [
            self._implies("PHI1_GEN.vanish.1/m+1/n<=1/2", rows, branch, 1,
                          lambda row: harmonic(row) <= Fraction(1, 2),
                          "1/m + 1/n <= 1/2 => ord_[0:1:0](Phi1) >= 1"),
            self._implies("PHI1_GEN.holomorphic.1/m+1/n<=2/3", rows, branch, 0,
                          lambda row: harmonic(row) <= Fraction(2, 3),
                          "1/m + 1/n <= 2/3 => ord_[0:1:0](Phi1) >= 0"),
            self._bound("PHI1_GEN.affine.X0", rows, _get("phi1_x0"), 0, "ord_X0(Phi1) >= 0"),
            self._bound("PHI1_GEN.affine.Y0", rows, _get("phi1_y0"), 0, "ord_Y0(Phi1) >= 0"),
            *self._curve_bookkeeping(rows),
        ]

    def _judge_general_surface(self, rows: Sequence[ThresholdRow]) -> List[Verdict]:
        return [
            self._bound("OMEGA_GEN.affine.X0", rows, _get("omega_x0"), 0, "ord_X0(omega_gen) >= 0"),
            self._bound("OMEGA_GEN.affine.Y0", rows, _get("omega_y0"), 0, "ord_Y0(omega_gen) >= 0"),
            self._bound("OMEGA_GEN.affine.Z0", rows, _get("omega_z0"), 0, "ord_Z0(omega_gen) >= 0"),
            *self._surface_bookkeeping(rows),
        ]

    def judge_bookkeeping(self, family: str, exponents: Sequence[Sequence[int]]) -> List[Verdict]:
        """Exponent bookkeeping alone, for sweeps too large to measure"""
        rows = [ThresholdRow(exponents=list(e)) for e in exponents]
        if family == "Cmn":
            return self._curve_bookkeeping(rows)
        if family == "Smnl":
            return self._surface_bookkeeping(rows)
        raise ValueError(f"no bookkeeping predicates for family {family!r}")

    def _curve_bookkeeping(self, rows) -> List[Verdict]:
        return [
            self._bookkeeping("EXPONENTS.1/m+1/n<=2/3=>max>=3", rows, Fraction(2, 3), 3),
            self._bookkeeping("EXPONENTS.1/m+1/n<=1/2=>max>=4", rows, Fraction(1, 2), 4),
        ]

    def _surface_bookkeeping(self, rows) -> List[Verdict]:
        return [
            self._bookkeeping("EXPONENTS.1/m+1/n+1/l<=3/8=>max>=8", rows, Fraction(3, 8), 8),
            self._bookkeeping("EXPONENTS.1/m+1/n+1/l<=1/3=>max>=9", rows, Fraction(1, 3), 9),
        ]

    def _exact(self, predicate: str, rows, measure: Measure, expected: Callable[[ThresholdRow], int], formula: str) -> Verdict:
        signals = []
        passed = True
        for row in rows:
            observed, want = measure(row), expected(row)
            ok = observed == want
            passed &= ok
            signals.append(f"{_label(row)}: {observed} {'=' if ok else '!='} {want}")
        return Verdict(predicate=predicate, passed=passed, observed=[measure(r) for r in rows],
                       expected="exact", signals=signals, formula=formula)

    def _iff(self, predicate: str, rows, measure: Measure, floor: int,
             condition: Callable[[ThresholdRow], bool], formula: str) -> Verdict:
        signals = []
        passed = True
        for row in rows:
            observed = measure(row)
            lhs = observed is not None and observed >= floor
            ok = lhs == condition(row)
            passed &= ok
            if not ok:
                signals.append(f"{_label(row)}: order {observed} contradicts the threshold")
        if passed:
            signals.append(f"threshold reproduced on {len(rows)} exponent tuples")
        return Verdict(predicate=predicate, passed=passed, observed=[measure(r) for r in rows],
                       expected=f"order >= {floor} exactly when the exponent condition holds",
                       signals=signals, formula=formula)

    def _implies(self, predicate: str, rows, measure: Measure, floor: int,
                 condition: Callable[[ThresholdRow], bool], formula: str) -> Verdict:
        signals = []
        passed = True
        checked = 0
        for row in rows:
            if not condition(row):
                continue
            checked += 1
            observed = measure(row)
            ok = observed is not None and observed >= floor
            passed &= ok
            signals.append(f"{_label(row)}: order {observed}")
        if not checked:
            signals.append("no exponent tuple satisfies the hypothesis")
        return Verdict(predicate=predicate, passed=passed, observed=[measure(r) for r in rows],
                       expected=f"order >= {floor} where the hypothesis holds", signals=signals, formula=formula)

    def _bound(self, predicate: str, rows, measure: Measure, floor: int, formula: str) -> Verdict:
        observed = [measure(r) for r in rows]
        bad = [f"{_label(r)}: {o}" for r, o in zip(rows, observed) if o is None or o < floor]
        signals = bad or [f"min order {min(o for o in observed if o is not None)}" if observed else "no rows"]
        return Verdict(predicate=predicate, passed=not bad, observed=observed,
                       expected=f">= {floor}", signals=signals, formula=formula)

    def _bookkeeping(self, predicate: str, rows, cap: Fraction, need: int) -> Verdict:
        """Exact rational check: sum 1/e <= cap forces some exponent >= need"""
        signals = []
        passed = True
        for row in rows:
            total = sum(Fraction(1, e) for e in row.exponents)
            if total <= cap:
                ok = max(row.exponents) >= need
                passed &= ok
                if not ok:
                    signals.append(f"{_label(row)}: sum {total} <= {cap} but max exponent {max(row.exponents)}")
        if passed:
            signals.append(f"holds on {len(rows)} exponent tuples")
        return Verdict(predicate=predicate, passed=passed, expected=f"max exponent >= {need}",
                       signals=signals, formula=f"sum(1/e) <= {cap} => max(e) >= {need}")

    def _seed_invariance(self, report: ThresholdReport) -> Verdict:
        drifted = [_label(r) for r in report.rows if not r.seed_agreement]
        return Verdict(
            predicate="TABLES.seed_invariant",
            passed=not drifted,
            observed=len(report.seeds),
            expected="identical measurements for every seed",
            signals=drifted or [f"identical across seeds {report.seeds}"],
            formula="table(seed_i) == table(seed_0)",
        )

    # Scalar checks

    def judge_verify(self, report: VerifyReport, family_id: str) -> Verdict:
        signals = [f"{report.accepted}/{report.samples} samples evaluated"]
        if report.skipped_near_pole:
            signals.append(f"{report.skipped_near_pole} samples skipped near poles")
        if report.skipped_branch:
            signals.append(f"{report.skipped_branch} samples skipped on branch cuts")
        signals.append(f"max scaled residual {report.max_residual:.3e}")
        return Verdict(
            predicate=f"{family_id}.residual<=tol",
            passed=report.accepted > 0 and report.max_residual <= report.tolerance,
            observed=report.max_residual,
            expected=f"<= {report.tolerance:g}",
            signals=signals,
            formula="|sum a_j f_j^n_j - 1| / max(1, sum |a_j f_j^n_j|)",
        )

    def judge_consistency(self, jd: str, deviation: float, tolerance: float = CONSISTENCY_TOL) -> Verdict:
        return Verdict(
            predicate=f"{jd}.representations_agree",
            passed=deviation <= tolerance,
            observed=deviation,
            expected=f"<= {tolerance:g}",
            signals=[f"max relative deviation {deviation:.3e}"],
            formula="max_k |c_k(rep_i) - c_k(rep_default)| / max(1, max |c_k(rep_default)|)",
        )

    def judge_annihilation(self, relation: str, value: float) -> Verdict:
        if relation == "generic":
            return Verdict(
                predicate="ANNIHILATION.control_nonzero",
                passed=value > CONTROL_FLOOR,
                observed=value,
                expected=f"> {CONTROL_FLOOR:g}",
                signals=[f"control germ leaves {value:.3e}"],
                formula="random germ outside every relation family",
            )
        return Verdict(
            predicate=f"ANNIHILATION.{relation}",
            passed=value <= ANNIHILATION_TOL,
            observed=value,
            expected=f"<= {ANNIHILATION_TOL:g}",
            signals=[f"relative block size {value:.3e}"],
            formula="max |A - B| / max(1, max |A|, max |B|)",
        )

    # Nevanlinna

    def judge_nevanlinna(self, report: NevanlinnaReport) -> List[Verdict]:
        verdicts: List[Verdict] = []
        rows = report.rows

        negatives = [
            f"r={row.r:g}: {name}={value:.3e}"
            for row in rows
            for name, value in (("T", row.T), ("m", row.m), ("N", row.N))
            if value is not None and value < -1e-9
        ]
        verdicts.append(Verdict(
            predicate="NEVANLINNA.nonnegative",
            passed=not negatives,
            signals=negatives or ["T, m and N are non-negative"],
            formula="T, m, N >= 0",
        ))

        ts = [(row.r, row.T) for row in rows if row.T is not None]
        drops = [f"T({r1:g})={t1:.6f} > T({r2:g})={t2:.6f}" for (r1, t1), (r2, t2) in zip(ts, ts[1:])
                 if t2 < t1 - 1e-6 * max(1.0, abs(t1))]
        if len(ts) > 1:
            verdicts.append(Verdict(
                predicate="NEVANLINNA.T_nondecreasing",
                passed=not drops,
                observed=[t for _, t in ts],
                signals=drops or [f"T non-decreasing over {len(ts)} radii"],
                formula="T(r_i) <= T(r_{i+1})",
            ))

        if any(row.fmt_residual is not None for row in rows):
            residuals = [row.fmt_residual for row in rows if row.fmt_residual is not None]
            verdicts.append(Verdict(
                predicate="FMT.bounded",
                passed=not report.growth_flag,
                observed=residuals,
                expected=f"bound {report.fmt_bound:.4f}" if report.fmt_bound is not None else "",
                signals=["residual growth detected" if report.growth_flag else "no residual growth"],
                formula="|T - m(r, 1/(f-a)) - N(r, 1/(f-a))| = O(1)",
            ))

        if report.defects:
            out_of_range = [d.value for d in report.defects if not 0.0 <= d.value <= 1.0]
            verdicts.append(Verdict(
                predicate="DEFECT.range",
                passed=not out_of_range,
                observed=[d.value for d in report.defects],
                signals=[f"{report.clamp_flags} estimates clamped"] + [f"outside [0,1]: {v}" for v in out_of_range],
                formula="0 <= delta^[k] <= 1",
            ))

        if report.check == "power" and report.power:
            verdicts.extend(self._power_rule(report))
        if report.check == "small-function":
            low = [d.value for d in report.defects if d.value < 1.0 - ESTIMATOR_NOISE]
            verdicts.append(Verdict(
                predicate="SMALL_FUNCTION.delta_inf=1",
                passed=not low,
                observed=[d.value for d in report.defects],
                expected=f">= {1.0 - ESTIMATOR_NOISE}",
                signals=[f"{len(report.defects)} members checked"] + [f"low defect {v:.3f}" for v in low],
                formula="delta(alpha_j f_j, inf) = 1",
            ))

        if report.lemma is not None:
            lemma = report.lemma
            verdicts.append(Verdict(
                predicate=f"LEMMA.defect_sum<={lemma.bound:g}",
                passed=lemma.margin >= -ESTIMATOR_NOISE,
                observed=lemma.defect_sum,
                expected=f"<= {lemma.bound + ESTIMATOR_NOISE:g}",
                signals=[f"case {lemma.case}", f"members {lemma.members}", f"margin {lemma.margin:.4f}"],
                formula="sum_j delta^[n](psi_j, 0) <= n",
            ))
            if lemma.cramer_residual is not None:
                verdicts.append(Verdict(
                    predicate="LEMMA.cramer_identity",
                    passed=lemma.cramer_residual <= CRAMER_TOL,
                    observed=lemma.cramer_residual,
                    expected=f"<= {CRAMER_TOL:g}",
                    signals=[f"max relative residual {lemma.cramer_residual:.3e}"],
                    formula="psi_i / psi_n = Delta_i / Delta",
                ))

        if report.logderiv is not None:
            verdicts.append(Verdict(
                predicate=f"LOGDERIV.k={report.logderiv.k}",
                passed=report.logderiv.violations == 0,
                observed=report.logderiv.violations,
                expected="0 violations",
                signals=[f"{len(report.logderiv.rows)} radii tabulated"],
                formula="m(r, X^k psi / psi) <= (3k/2) log T - kappa r^2 + log+ log r + slack",
            ))

        ratios = [row.growth_ratio for row in rows if row.growth_ratio is not None]
        if ratios:
            flat = report.surface == "C"
            bad = [v for v in ratios if (v != 0.0 if flat else v > 0.0)]
            verdicts.append(Verdict(
                predicate="GROWTH.ratio" + ("=0" if flat else "<=0"),
                passed=not bad,
                observed=ratios,
                expected="0" if flat else "<= 0",
                signals=[f"{len(ratios)} radii sampled"],
                formula="kappa(r) r^2 / T_f(r)",
            ))
        return verdicts

    def _power_rule(self, report: NevanlinnaReport) -> List[Verdict]:
        m = report.power
        verdicts = []
        for estimate in report.defects:
            k = estimate.truncation
            if k is None:
                continue
            floor = 1.0 - k / m
            verdicts.append(Verdict(
                predicate=f"POWER.delta[{k}](f^{m},0)>=1-{k}/{m}",
                passed=estimate.value >= floor - ESTIMATOR_NOISE,
                observed=estimate.value,
                expected=f">= {floor - ESTIMATOR_NOISE:.4f}",
                signals=[f"schedule {estimate.schedule}"],
                formula=f"delta^[{k}](f^m, 0) >= 1 - {k}/m",
            ))
        return verdicts


def all_passed(verdicts: Sequence[Verdict]) -> bool:
    return all(v.passed for v in verdicts)


def _get(key: str) -> Measure:
    return lambda row: row.measurements.get(key)


def _min_of(*keys: str) -> Measure:
    def measure(row: ThresholdRow) -> Optional[int]:
        values = [row.measurements.get(k) for k in keys]
        return None if any(v is None for v in values) else min(values)
    return measure


def _label(row: ThresholdRow) -> str:
    return "(" + ",".join(str(e) for e in row.exponents) + ")"
