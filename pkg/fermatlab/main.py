"""
fermatlab - Command-line driver
Constructs Fermat solutions, tabulates jet orders and runs Nevanlinna experiments
"""
import argparse
import csv
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from fermatlab import __version__
from fermatlab.models import (
    ComplexValue,
    ExperimentResult,
    GridSpec,
    NevanlinnaReport,
    QuadratureConfig,
    ReportDocument,
    RunConfig,
)
from fermatlab.services.elliptic import EquianharmonicWeierstrass, default_context
from fermatlab.services.expr_core import AnalyticExpr, FermatLabError
from fermatlab.services.jets import Family, JetAnalyzer, TruncationExhausted
from fermatlab.services.nevanlinna import (
    DEFAULT_SCHEDULE,
    POWER_SCHEDULE,
    SMALL_FUNCTION_SCHEDULE,
    NevanlinnaAnalyzer,
    QuadratureBudgetExceeded,
    builtin_functions,
    builtin_tuples,
    surface_for,
)
from fermatlab.services.series import NeedsRamification
from fermatlab.services.solutions import CATALOG_IDS, ParameterOutOfRange, SolutionFactory, UnknownFamily
from fermatlab.services.verdict_engine import VerdictEngine, all_passed
from fermatlab.utils.helpers import (
    parse_complex,
    parse_complex_list,
    parse_float_list,
    parse_int_list,
    parse_range,
    run_id,
)
from fermatlab.utils.sexpr import SExprError, parse_sexpr, to_sexpr

# Load environment variables from the repository root
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(env_path)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_VERDICT = 1
EXIT_PARAMETER = 2
EXIT_SCHEMA = 3
EXIT_TRUNCATION = 4
EXIT_BUDGET = 5

BUILTIN_PREFIX = "builtin:"


def configure_logging() -> None:
    """File + stderr handlers; stdout stays reserved for the JSON report"""
    level = getattr(logging, os.getenv("FERMATLAB_LOG_LEVEL", "INFO").upper(), logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    log_file = os.getenv("FERMATLAB_LOG_FILE", "fermatlab.log")
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file, encoding='utf-8'))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


# ---------------------------------------------------------------------------
# Arguments and config files
# ---------------------------------------------------------------------------

def _flag(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# converters shared by argparse and --config files
CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "family": str,
    "n": int,
    "k": int,
    "m": int,
    "l": int,
    "a": parse_complex_list,
    "params": parse_complex_list,
    "b": parse_complex,
    "exponents": parse_int_list,
    "variant": int,
    "inner": str,
    "seed": int,
    "grid": str,
    "radius": float,
    "points": int,
    "tolerance": float,
    "range": parse_range,
    "max_exponent": int,
    "truncation": int,
    "tables": _flag,
    "f": str,
    "tuple": str,
    "surface": str,
    "radii": parse_float_list,
    "defect_truncation": int,
    "defect_check": str,
    "growth_ratio": _flag,
    "rtol": float,
    "max_evaluations": int,
    "method": str,
    "output": str,
    "csv": str,
    "no_timestamp": _flag,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="Key-value file with the same keys as the long flags")
    p.add_argument("--seed", type=int, help="Seed for random parameters and sample grids")
    p.add_argument("--output", help="JSON report path (default: stdout)")
    p.add_argument("--csv", help="CSV table path")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_const", const=True,
                   help="Omit generated_at so identical configs give identical reports")


def _add_family(p: argparse.ArgumentParser, a_flag: str) -> None:
    p.add_argument("--family", help="Factory family or catalog id")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument(a_flag, dest="a" if a_flag == "--a" else "params", type=parse_complex_list,
                   help="Family parameters a_2..a_k, comma or semicolon separated")
    p.add_argument("--b", type=parse_complex)
    p.add_argument("--exponents", type=parse_int_list)
    p.add_argument("--variant", type=int)
    p.add_argument("--inner", help="Inner function as an S-expression (catalog only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermatlab",
        description="Numerical laboratory for Fermat functional equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    construct = sub.add_parser("construct", help="Build a solution tuple and verify its residual")
    _add_family(construct, "--a")
    construct.add_argument("--grid", choices=["polar", "random"])
    construct.add_argument("--radius", type=float)
    construct.add_argument("--points", type=int)
    construct.add_argument("--tolerance", type=float)
    _add_common(construct)

    jets = sub.add_parser("jets", help="Pole orders of jet differentials and threshold verdicts")
    jets.add_argument("--family", choices=[f.value for f in Family])
    jets.add_argument("--range", type=parse_range, help="Exponent range, e.g. 2..12")
    jets.add_argument("--n", type=int)
    jets.add_argument("--m", type=int)
    jets.add_argument("--l", type=int)
    jets.add_argument("--exponents", type=parse_int_list)
    jets.add_argument("--truncation", type=int)
    jets.add_argument("--max-exponent", dest="max_exponent", type=int)
    jets.add_argument("--tables", action="store_const", const=True, help="Embed the order tables")
    _add_common(jets)

    nev = sub.add_parser("nevanlinna", help="Characteristic, counting and defect experiments")
    nev.add_argument("--f", help="Function: builtin:<name> or an S-expression")
    nev.add_argument("--tuple", help="Tuple: builtin:<name> or S-expressions separated by ';'")
    nev.add_argument("--surface", choices=["C", "D"])
    nev.add_argument("--radii", type=parse_float_list)
    nev.add_argument("--a", type=parse_complex, help="Target value a (omit for infinity)")
    nev.add_argument("--defect-truncation", dest="defect_truncation", type=int)
    nev.add_argument("--defect-check", dest="defect_check",
                     choices=["lemma52", "power", "logderiv", "small-function"])
    nev.add_argument("--growth-ratio", dest="growth_ratio", action="store_const", const=True)
    nev.add_argument("--m", type=int, help="Power for the power-rule check")
    nev.add_argument("--rtol", type=float)
    nev.add_argument("--max-evaluations", dest="max_evaluations", type=int)
    nev.add_argument("--method", choices=["area", "boundary"])
    _add_family(nev, "--params")
    _add_common(nev)
    return parser


def read_config_file(path: str) -> Dict[str, Any]:
    """Key-value file parsed with dotenv; keys accept dashes or underscores"""
    if not Path(path).exists():
        raise FileNotFoundError(f"config file not found: {path}")
    values: Dict[str, Any] = {}
    for key, raw in dotenv_values(path).items():
        name = key.strip().lower().replace("-", "_")
        if raw is None:
            continue
        convert = CONVERTERS.get(name)
        if convert is None:
            raise ValueError(f"unknown config key {key!r}")
        values[name] = convert(raw)
    return values


def merged_options(args: argparse.Namespace) -> Dict[str, Any]:
    """Config-file values overridden by explicit flags"""
    options: Dict[str, Any] = {}
    if getattr(args, "config", None):
        options.update(read_config_file(args.config))
    options.update({k: v for k, v in vars(args).items() if v is not None and k != "config"})
    return options


def _complex_list(values: Optional[Sequence[complex]]) -> List[ComplexValue]:
    return [ComplexValue.of(v) for v in values or []]


def build_run_config(options: Dict[str, Any]) -> RunConfig:
    """Map CLI options onto the validated RunConfig"""
    command = options["command"]
    fields: Dict[str, Any] = {"command": command}
    for name in ("family", "n", "k", "m", "l", "exponents", "variant", "inner", "seed", "tolerance",
                 "max_exponent", "truncation", "surface", "radii", "defect_truncation", "defect_check",
                 "output", "csv"):
        if name in options:
            fields[name] = options[name]
    family_params = options.get("params") if command == "nevanlinna" else options.get("a")
    fields["a"] = _complex_list(family_params)
    if "b" in options:
        fields["b"] = ComplexValue.of(options["b"])
    if command == "nevanlinna" and "a" in options:
        value = options["a"]
        if isinstance(value, list):
            value = value[0] if value else None
        if value is not None:
            fields["a_value"] = ComplexValue.of(value)
    if "range" in options:
        fields["exponent_range"] = options["range"]
    if "f" in options:
        fields["function"] = options["f"]
    if "tuple" in options:
        fields["tuple_spec"] = options["tuple"]
    fields["include_tables"] = bool(options.get("tables", False))
    fields["growth_ratio"] = bool(options.get("growth_ratio", False))
    fields["no_timestamp"] = bool(options.get("no_timestamp", False))

    grid = {key: options[flag] for key, flag in (("kind", "grid"), ("radius", "radius"), ("points", "points"))
            if flag in options}
    grid["seed"] = options.get("seed", 0) or 0
    fields["grid"] = GridSpec(**grid)

    quadrature = {}
    if "rtol" in options:
        quadrature["rtol"] = options["rtol"]
    if "max_evaluations" in options:
        quadrature["max_evaluations"] = options["max_evaluations"]
    if "method" in options:
        quadrature["characteristic_method"] = options["method"]
    fields["quadrature"] = QuadratureConfig(**quadrature)
    return RunConfig(**fields)


def config_echo(config: RunConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json", exclude={"output", "csv", "no_timestamp"})


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _document(config: RunConfig, results: List[ExperimentResult], verdicts) -> ReportDocument:
    echo = config_echo(config)
    return ReportDocument(
        tool_version=__version__,
        run_id=run_id(echo),
        generated_at=None if config.no_timestamp else datetime.now(timezone.utc).isoformat(timespec="seconds"),
        config=echo,
        results=results,
        verdicts=verdicts,
        passed=all_passed(verdicts),
    )


def cmd_construct(config: RunConfig) -> ReportDocument:
    """Emit the solution tuple with its verify report"""
    if not config.family:
        raise ParameterOutOfRange("construct needs --family")
    factory = SolutionFactory()
    if config.family in CATALOG_IDS:
        inner = parse_function(config.inner, factory.context)
        solution = factory.catalog(config.family, inner)
    elif config.a:
        solution = factory.build(
            config.family,
            n=config.n,
            k=config.k,
            a=[v.to_complex() for v in config.a],
            b=config.b.to_complex() if config.b else None,
            exponents=config.exponents,
            variant=config.variant,
        )
    else:
        rng = np.random.default_rng(config.seed or 0)
        params = factory.draw_parameters(
            config.family, rng, n=config.n, k=config.k, exponents=config.exponents, variant=config.variant
        )
        logger.info(f"Drew parameters for {config.family} with seed {config.seed or 0}")
        solution = factory.build(**params)

    report = factory.verify(solution, config.grid, config.tolerance)
    verdict = VerdictEngine().judge_verify(report, solution.family_id)
    result = ExperimentResult(
        name=solution.family_id,
        kind="construct",
        data={
            "solution": factory.summarize(solution).model_dump(mode="json"),
            "verify": report.model_dump(mode="json"),
        },
    )
    return _document(config, [result], [verdict])


def _jet_exponents(config: RunConfig) -> Optional[List[List[int]]]:
    if config.exponents:
        return [list(config.exponents)]
    family = Family(config.family)
    if family in (Family.C_N, Family.S_N) and config.n is not None:
        return [[config.n]]
    if family is Family.C_MN and config.m is not None and config.n is not None:
        return [[config.m, config.n]]
    if family is Family.S_MNL and None not in (config.m, config.n, config.l):
        return [[config.m, config.n, config.l]]
    return None


def cmd_jets(config: RunConfig) -> ReportDocument:
    """Order tables and threshold verdicts over an exponent range"""
    if not config.family:
        raise ParameterOutOfRange("jets needs --family")
    explicit = _jet_exponents(config)
    if explicit is None and config.exponent_range is None:
        raise ParameterOutOfRange("jets needs --range or explicit exponents")
    if explicit is not None and max(max(e) for e in explicit) > config.max_exponent:
        raise ParameterOutOfRange(f"exponents exceed max_exponent={config.max_exponent}")
    seed = config.seed or 0
    analyzer = JetAnalyzer(truncation=config.truncation)
    report = analyzer.threshold_verify(
        Family(config.family),
        exponent_range=config.exponent_range,
        exponents=explicit,
        seeds=(seed, seed + 1, seed + 2),
        include_tables=config.include_tables,
    )
    result = ExperimentResult(
        name=f"thresholds-{report.family}",
        kind="threshold",
        data=report.model_dump(mode="json", exclude={"verdicts"}),
    )
    return _document(config, [result], report.verdicts)


def parse_function(text: str, context: Optional[EquianharmonicWeierstrass] = None) -> AnalyticExpr:
    """S-expression with p-nodes bound to the given elliptic context"""
    return parse_sexpr(text, context if context is not None else default_context())


def resolve_function(text: str) -> AnalyticExpr:
    if text.startswith(BUILTIN_PREFIX):
        name = text[len(BUILTIN_PREFIX):]
        table = builtin_functions()
        if name not in table:
            raise UnknownFamily(f"unknown builtin function {name!r}; known: {', '.join(table)}")
        return table[name]
    return parse_function(text)


def resolve_tuple(text: str) -> List[AnalyticExpr]:
    if text.startswith(BUILTIN_PREFIX):
        name = text[len(BUILTIN_PREFIX):]
        table = builtin_tuples()
        if name not in table:
            raise UnknownFamily(f"unknown builtin tuple {name!r}; known: {', '.join(table)}")
        return table[name]
    return [parse_function(part) for part in text.split(";") if part.strip()]


def _family_components(config: RunConfig) -> Optional[List[AnalyticExpr]]:
    if not config.family:
        return None
    factory = SolutionFactory()
    if config.family in CATALOG_IDS:
        return list(factory.catalog(config.family, parse_function(config.inner, factory.context)).exprs)
    solution = factory.build(
        config.family,
        n=config.n,
        k=config.k,
        a=[v.to_complex() for v in config.a],
        b=config.b.to_complex() if config.b else None,
        exponents=config.exponents,
        variant=config.variant,
    )
    return list(solution.exprs)


def cmd_nevanlinna(config: RunConfig) -> ReportDocument:
    """Nevanlinna rows per radius, or one of the defect checks"""
    analyzer = NevanlinnaAnalyzer(config.quadrature)
    surface = surface_for(config.surface)
    check = config.defect_check
    radii = config.radii

    if check == "lemma52":
        psis = resolve_tuple(config.tuple_spec or "builtin:exp-syzygy")
        lemma = analyzer.lemma_defect_check(psis, surface, radii or DEFAULT_SCHEDULE, seed=config.seed or 0)
        report = NevanlinnaReport(
            function="; ".join(to_sexpr(p) for p in psis),
            surface=surface.kind.value,
            defects=lemma.defects,
            clamp_flags=sum(d.clamped for d in lemma.defects),
            lemma=lemma,
            check="lemma52",
        )
    elif check == "power":
        f = resolve_function(config.function or "builtin:power-test")
        report = analyzer.power_rule_check(f, config.m or 3, radii or POWER_SCHEDULE, surface)
    elif check == "small-function":
        tuples = builtin_tuples()
        report = analyzer.small_function_check(
            tuples["small-functions"], tuples["small-functions-f"], schedule=radii or SMALL_FUNCTION_SCHEDULE,
            surface=surface,
        )
    elif check == "logderiv":
        psi = resolve_function(config.function or "builtin:exp-z2")
        logderiv = analyzer.logderiv_check(psi, config.defect_truncation or 1, radii or DEFAULT_SCHEDULE, surface)
        report = NevanlinnaReport(
            function=to_sexpr(psi), surface=surface.kind.value, logderiv=logderiv, check="logderiv"
        )
    else:
        if not radii:
            raise ParameterOutOfRange("nevanlinna needs --radii")
        components = _family_components(config)
        if components is None and config.tuple_spec:
            components = resolve_tuple(config.tuple_spec)
        if config.function:
            f = resolve_function(config.function)
        elif components:
            f = components[0]
        else:
            raise ParameterOutOfRange("nevanlinna needs --f, --tuple or --family")
        report = analyzer.report(
            f,
            surface,
            radii,
            a=config.a_value.to_complex() if config.a_value else None,
            truncation=config.defect_truncation,
            components=components,
            with_growth_ratio=config.growth_ratio,
        )

    verdicts = VerdictEngine().judge_nevanlinna(report)
    result = ExperimentResult(name=report.check or "nevanlinna", kind="nevanlinna",
                              data=report.model_dump(mode="json"))
    return _document(config, [result], verdicts)


COMMANDS: Dict[str, Callable[[RunConfig], ReportDocument]] = {
    "construct": cmd_construct,
    "jets": cmd_jets,
    "nevanlinna": cmd_nevanlinna,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def table_rows(document: ReportDocument) -> List[Dict[str, Any]]:
    """Flat rows for plotting"""
    rows: List[Dict[str, Any]] = []
    for result in document.results:
        data = result.data
        if result.kind == "threshold":
            for row in data.get("rows", []):
                flat = {"exponents": "x".join(map(str, row["exponents"]))}
                flat.update(row["measurements"])
                flat["seed_agreement"] = row["seed_agreement"]
                rows.append(flat)
        elif result.kind == "nevanlinna":
            rows.extend(dict(row) for row in data.get("rows", []))
            if data.get("logderiv"):
                rows.extend(dict(row) for row in data["logderiv"]["rows"])
            if not rows:
                for d in data.get("defects", []):
                    rows.append({"truncation": d["truncation"], "value": d["value"], "clamped": d["clamped"]})
        else:
            verify = data.get("verify", {})
            rows.append({key: verify.get(key) for key in
                         ("samples", "accepted", "max_residual", "max_abs_residual", "skipped_near_pole",
                          "skipped_branch", "tolerance")})
    return rows


def write_csv(path: str, rows: List[Dict[str, Any]]) -> None:
    columns: List[str] = []
    for row in rows:
        columns.extend(key for key in row if key not in columns)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"[INFO] Wrote {len(rows)} rows to {path}")


def emit(document: ReportDocument, config: RunConfig) -> None:
    text = document.model_dump_json(indent=2)
    if config.output:
        Path(config.output).write_text(text + "\n", encoding="utf-8")
        logger.info(f"[INFO] Report written to {config.output}")
    else:
        sys.stdout.write(text + "\n")
    if config.csv:
        write_csv(config.csv, table_rows(document))


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, validate, execute and emit; returns the exit code"""
    args = build_parser().parse_args(argv)
    try:
        config = build_run_config(merged_options(args))
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_SCHEMA
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_SCHEMA

    try:
        document = COMMANDS[config.command](config)
    except (ValidationError, SExprError) as e:
        logger.error(f"Schema error: {e}")
        return EXIT_SCHEMA
    except TruncationExhausted as e:
        logger.error(f"Truncation exhausted: {e}")
        return EXIT_TRUNCATION
    except QuadratureBudgetExceeded as e:
        logger.error(f"Quadrature budget exceeded: {e}")
        return EXIT_BUDGET
    except (ParameterOutOfRange, UnknownFamily, NeedsRamification) as e:
        logger.error(f"Parameter error: {e}")
        return EXIT_PARAMETER
    except (FermatLabError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_PARAMETER

    emit(document, config)
    failed = [v.predicate for v in document.verdicts if not v.passed]
    if failed:
        logger.warning(f"{len(failed)} predicates failed: {', '.join(failed)}")
        return EXIT_VERDICT
    logger.info(f"[SUCCESS] {config.command}: {len(document.verdicts)} predicates hold")
    return EXIT_PASS


def main() -> None:
    configure_logging()
    sys.exit(run())


if __name__ == "__main__":
    main()
