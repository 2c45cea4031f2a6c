"""
Run the acceptance suite and cache a single report
Nine criteria: construction, curve and surface tables, generalized thresholds,
Cramer consistency, annihilation, elliptic checks, Nevanlinna checks, determinism
"""
import sys
import time
from pathlib import Path
from typing import Callable, List, Tuple

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from dotenv import load_dotenv
from scipy.special import beta

from fermatlab import __version__
from fermatlab.main import build_run_config, cmd_jets, configure_logging
from fermatlab.models import ExperimentResult, GridSpec, ReportDocument, Verdict
from fermatlab.services.elliptic import E_ROOT, LatticePoleError, ZeroOfWp, default_context
from fermatlab.services.expr_core import Z, exp
from fermatlab.services.jets import (
    ANNIHILATION_RELATIONS,
    Divisor,
    Family,
    JetAnalyzer,
    JetId,
    annihilation_check,
    chart_curve,
    chart_surface,
    representation_consistency,
    sweep_exponents,
)
from fermatlab.services.nevanlinna import (
    ComplexPlane,
    NevanlinnaAnalyzer,
    PoincareDisc,
    ZeroPoleList,
    builtin_functions,
    builtin_tuples,
)
from fermatlab.services.solutions import CATALOG_IDS, SolutionFactory
from fermatlab.services.verdict_engine import VerdictEngine, all_passed
from fermatlab.utils.helpers import run_id

load_dotenv()

DRAWS = 20
LOOSE_CATALOG = ("K2N3_BAKER", "K3N5_M")
FACTORY_CASES = [
    {"family": "holo-equal", "n": 3, "k": 3},
    {"family": "holo-equal", "n": 5, "k": 2},
    {"family": "mero-equal", "n": 3, "k": 3},
    {"family": "mero-equal", "n": 4, "k": 5, "variant": 1},
    {"family": "mero-equal", "n": 3, "k": 4, "variant": 2},
    {"family": "holo-general", "exponents": [2, 3, 6]},
    {"family": "mero-general", "exponents": [2, 3]},
]

Criterion = Callable[[], Tuple[List[Verdict], dict]]


def _check(predicate: str, passed: bool, observed, expected: str, formula: str, *signals: str) -> Verdict:
    return Verdict(predicate=predicate, passed=bool(passed), observed=observed, expected=expected,
                   signals=list(signals), formula=formula)


def construction() -> Tuple[List[Verdict], dict]:
    """Factory families over random parameters and the whole catalog"""
    factory = SolutionFactory()
    engine = VerdictEngine()
    verdicts, worst = [], {}
    for case in FACTORY_CASES:
        rng = np.random.default_rng(len(verdicts))
        label = case["family"] + "".join(f"-{k}{v}" for k, v in case.items() if k != "family")
        reports = []
        for _ in range(DRAWS):
            params = factory.draw_parameters(rng=rng, **case)
            reports.append(factory.verify(factory.build(**params), GridSpec(points=200), 1e-9))
        failing = [r for r in reports if r.max_residual > 1e-9 or r.accepted == 0]
        worst[label] = max(r.max_residual for r in reports)
        verdicts.append(_check(f"{label}.residual<=1e-9", not failing, worst[label], "<= 1e-09",
                               "max over draws of the scaled residual", f"{DRAWS} draws, {len(failing)} failing"))
    for family_id in CATALOG_IDS:
        tolerance = 1e-8 if family_id in LOOSE_CATALOG else 1e-9
        radius = 0.7 if family_id == "K3N5_M" else 0.9
        report = factory.verify(factory.catalog(family_id), GridSpec(points=200, radius=radius), tolerance)
        worst[family_id] = report.max_residual
        verdicts.append(engine.judge_verify(report, family_id))
    return verdicts, {"max_residual": worst}


def curve_table() -> Tuple[List[Verdict], dict]:
    report = JetAnalyzer().threshold_verify(Family.C_N, (2, 12))
    return report.verdicts, {"rows": [r.model_dump(mode="json") for r in report.rows]}


def surface_table() -> Tuple[List[Verdict], dict]:
    report = JetAnalyzer().threshold_verify(Family.S_N, (6, 12))
    return report.verdicts, {"rows": [r.model_dump(mode="json") for r in report.rows]}


def generalized_thresholds() -> Tuple[List[Verdict], dict]:
    analyzer = JetAnalyzer()
    report = analyzer.threshold_verify(Family.C_MN, exponents=[(6, 3), (5, 4), (4, 4)])
    verdicts = list(report.verdicts)
    engine = VerdictEngine()
    verdicts += engine.judge_bookkeeping("Cmn", sweep_exponents(Family.C_MN, (1, 12)))
    verdicts += engine.judge_bookkeeping("Smnl", sweep_exponents(Family.S_MNL, (1, 12)))
    return verdicts, {"rows": [r.model_dump(mode="json") for r in report.rows]}


def cramer_consistency() -> Tuple[List[Verdict], dict]:
    analyzer = JetAnalyzer()
    engine = VerdictEngine()
    verdicts, deviations = [], {}
    for seed in range(3):
        charts = {
            JetId.PHI_CURVE: lambda b, k: chart_curve(Family.C_N, Divisor.INFINITY, (5,), k),
            JetId.PSI_CURVE: lambda b, k: chart_curve(Family.C_N, Divisor.Y0, (5,), k),
            JetId.PHI_SURF: lambda b, k: chart_surface(Family.S_N, Divisor.W0, b, (7,), k),
            JetId.PHI1_GEN: lambda b, k: chart_curve(Family.C_MN, Divisor.X0, (5, 3), k),
            JetId.PHI2_GEN: lambda b, k: chart_surface(Family.S_MNL, Divisor.X0, b, (5, 4, 3), k),
        }
        for jd, build in charts.items():
            base, branch = analyzer.generic_point(seed, (5, 4, 3))
            deviation = representation_consistency(jd, build(base, branch))
            deviations[f"{jd.value}/seed{seed}"] = deviation
            verdicts.append(engine.judge_consistency(f"{jd.value}.seed{seed}", deviation))
    return verdicts, {"deviations": deviations}


def annihilation() -> Tuple[List[Verdict], dict]:
    engine = VerdictEngine()
    values = {relation: annihilation_check(relation, 5) for relation in ANNIHILATION_RELATIONS}
    return [engine.judge_annihilation(rel, v) for rel, v in values.items()], {"values": values}


def elliptic() -> Tuple[List[Verdict], dict]:
    ctx = default_context()
    rng = np.random.default_rng(7)
    zs = []
    while len(zs) < 100:
        z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        if abs(ctx.reduce([z])[0]) > 0.3:
            zs.append(z)
    p, dp, _ = ctx.wp_pair(zs)
    ode = float(np.max(np.abs(dp ** 2 - 4 * p ** 3 + 1) / np.maximum(1.0, np.abs(4 * p ** 3))))
    oracle = E_ROOT / 3.0 * beta(1.0 / 6.0, 0.5)
    period = abs(ctx.real_half_period - oracle)
    baker = 0.0
    for z in zs[:50]:
        try:
            pair = ctx.baker_pair(z)
        except (LatticePoleError, ZeroOfWp):
            continue
        baker = max(baker, abs(pair.p ** 3 + pair.q ** 3 - 1) / max(1.0, abs(pair.p) ** 3 + abs(pair.q) ** 3))
    verdicts = [
        _check("ELLIPTIC.ode", ode <= 1e-9, ode, "<= 1e-09", "|p'^2 - 4p^3 + 1| / max(1, |4p^3|)"),
        _check("ELLIPTIC.half_period", period <= 1e-8, period, "<= 1e-08", "|omega - (e/3) B(1/6, 1/2)|"),
        _check("ELLIPTIC.baker", baker <= 1e-9, baker, "<= 1e-09", "|p^3 + q^3 - 1|"),
    ]
    return verdicts, {"ode": ode, "half_period": ctx.real_half_period, "oracle": oracle, "baker": baker}


def nevanlinna() -> Tuple[List[Verdict], dict]:
    analyzer = NevanlinnaAnalyzer()
    engine = VerdictEngine()
    plane, disc = ComplexPlane(), PoincareDisc()
    verdicts: List[Verdict] = []
    data: dict = {}

    ts = {r: analyzer.char_T(Z, plane, r) for r in (1.0, 2.0, 4.0)}
    errors = {r: abs(t / (0.5 * np.log1p(r * r)) - 1) for r, t in ts.items()}
    verdicts.append(_check("NEVANLINNA.T(z)", max(errors.values()) <= 0.01, list(ts.values()),
                           "within 1% of log(1+r^2)/2", "T(r, z) = log(1 + r^2)/2"))

    zeros = ZeroPoleList.of([0.5])
    counts = {r: analyzer.counting_N(zeros, plane, r) for r in (1.0, 2.0, 4.0)}
    gap = max(abs(n - np.log(2 * r)) for r, n in counts.items())
    verdicts.append(_check("NEVANLINNA.N(z-0.5)", gap <= 1e-6, list(counts.values()), "log(2r)",
                           "N(r, 1/(z - 0.5)) = log(2r)"))

    for name, f, a in (("z", Z, 0.5), ("exp", exp(Z), 2.0), ("z^2", Z * Z, 0.3)):
        report = analyzer.report(f, plane, [2.0, 4.0, 8.0], a=a)
        data[f"fmt/{name}"] = [row.fmt_residual for row in report.rows]
        verdicts += [v for v in engine.judge_nevanlinna(report) if v.predicate == "FMT.bounded"]

    test = builtin_functions()["power-test"]
    for m in (3, 5):
        report = analyzer.power_rule_check(test, m)
        data[f"power/{m}"] = [d.value for d in report.defects]
        verdicts += [v for v in engine.judge_nevanlinna(report) if v.predicate.startswith("POWER")]

    lemma = analyzer.lemma_defect_check(builtin_tuples()["exp-syzygy"])
    data["lemma"] = lemma.model_dump(mode="json")
    verdicts.append(_check("LEMMA.defect_sum<=2.05", lemma.defect_sum <= 2.05, lemma.defect_sum, "<= 2.05",
                           "sum_j delta^[2](psi_j, 0) <= 2", f"case {lemma.case}"))

    flat = [analyzer.growth_ratio([Z, exp(Z)], plane, r) for r in (1.0, 2.0, 3.0)]
    members = SolutionFactory().holo_equal(3, 2, [0.5]).exprs
    curved = [analyzer.growth_ratio(members, disc, r) for r in (1.0, 2.0, 3.0)]
    data["growth"] = {"C": flat, "D": curved}
    verdicts.append(_check("GROWTH.ratio=0.C", all(v == 0.0 for v in flat), flat, "0", "kappa = 0"))
    verdicts.append(_check("GROWTH.ratio<=0.D", all(v <= 0.0 for v in curved), curved, "<= 0", "kappa = -1"))
    return verdicts, data


def determinism() -> Tuple[List[Verdict], dict]:
    options = {"command": "jets", "family": "Cn", "range": (2, 6), "no_timestamp": True, "seed": 3}
    first = cmd_jets(build_run_config(options)).model_dump_json(indent=2)
    second = cmd_jets(build_run_config(options)).model_dump_json(indent=2)
    same = first == second
    return [_check("DETERMINISM.byte_identical", same, len(first), "identical", "json(run_1) == json(run_2)")], {
        "bytes": len(first)
    }


CRITERIA: List[Tuple[str, str, Criterion]] = [
    ("construction", "construct", construction),
    ("curve-table", "threshold", curve_table),
    ("surface-table", "threshold", surface_table),
    ("generalized-thresholds", "threshold", generalized_thresholds),
    ("cramer-consistency", "consistency", cramer_consistency),
    ("annihilation", "annihilation", annihilation),
    ("elliptic", "elliptic", elliptic),
    ("nevanlinna", "nevanlinna", nevanlinna),
    ("determinism", "threshold", determinism),
]


def main() -> int:
    """Run every criterion and save the report"""
    configure_logging()
    print("🚀 fermatlab acceptance suite")
    print("=" * 60)

    results, verdicts = [], []
    for name, kind, criterion in CRITERIA:
        print(f"\n📊 {name}")
        started = time.perf_counter()
        try:
            found, data = criterion()
        except Exception as e:
            print(f"  └─ ✗ Failed: {e}")
            found, data = [_check(f"{name}.completed", False, None, "no error", "criterion ran", str(e))], {}
        passed = sum(v.passed for v in found)
        print(f"  └─ {'✓' if passed == len(found) else '✗'} {passed}/{len(found)} predicates "
              f"({time.perf_counter() - started:.1f}s)")
        results.append(ExperimentResult(name=name, kind=kind, data=data))
        verdicts.extend(found)

    echo = {"suite": "acceptance", "criteria": [name for name, _, _ in CRITERIA]}
    document = ReportDocument(
        tool_version=__version__,
        run_id=run_id(echo),
        config=echo,
        results=results,
        verdicts=verdicts,
        passed=all_passed(verdicts),
    )
    cache_file = Path(__file__).parent.parent / "cache" / "acceptance_report.json"
    cache_file.parent.mkdir(exist_ok=True)
    cache_file.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8")

    print("\n" + "=" * 60)
    print(f"{'✅' if document.passed else '❌'} {sum(v.passed for v in verdicts)}/{len(verdicts)} predicates hold")
    print(f"📁 Saved to: {cache_file}")
    return 0 if document.passed else 1


if __name__ == "__main__":
    sys.exit(main())
