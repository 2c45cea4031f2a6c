import csv
import json

import pytest

from fermatlab.main import (
    EXIT_PARAMETER,
    EXIT_PASS,
    EXIT_SCHEMA,
    build_parser,
    build_run_config,
    merged_options,
    read_config_file,
    resolve_function,
    resolve_tuple,
    run,
)
from fermatlab.models import RunConfig
from fermatlab.services.elliptic import default_context
from fermatlab.services.expr_core import walk


def _load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_construct_writes_report(tmp_path):
    out = tmp_path / "report.json"
    code = run(["construct", "--family", "holo-equal", "--n", "3", "--k", "2", "--a", "0.5",
                "--output", str(out)])
    assert code == EXIT_PASS
    document = _load(out)
    assert document["schema_version"] == "report-v1"
    assert document["passed"] is True
    assert document["results"][0]["kind"] == "construct"
    assert document["results"][0]["data"]["verify"]["max_residual"] <= 1e-9


def test_construct_rejects_inadmissible_parameter(tmp_path):
    code = run(["construct", "--family", "holo-equal", "--n", "3", "--k", "2", "--a", "1.2",
                "--output", str(tmp_path / "r.json")])
    assert code == EXIT_PARAMETER


def test_unknown_family_is_a_parameter_error(tmp_path):
    code = run(["construct", "--family", "no-such-family", "--a", "0.5", "--output", str(tmp_path / "r.json")])
    assert code == EXIT_PARAMETER


def test_malformed_inner_function_is_a_schema_error(tmp_path):
    code = run(["construct", "--family", "K2N2_TRIG", "--inner", "(exp z", "--output", str(tmp_path / "r.json")])
    assert code == EXIT_SCHEMA


def test_grid_validation_is_a_schema_error(tmp_path):
    code = run(["construct", "--family", "holo-equal", "--n", "3", "--k", "2", "--a", "0.5",
                "--points", "0", "--output", str(tmp_path / "r.json")])
    assert code == EXIT_SCHEMA


def test_jets_threshold_run_with_csv(tmp_path):
    out = tmp_path / "jets.json"
    table = tmp_path / "jets.csv"
    code = run(["jets", "--family", "Cn", "--range", "2..5", "--output", str(out), "--csv", str(table)])
    assert code == EXIT_PASS
    document = _load(out)
    rows = document["results"][0]["data"]["rows"]
    assert [row["exponents"] for row in rows] == [[2], [3], [4], [5]]
    with open(table, newline="", encoding="utf-8") as handle:
        assert [row["exponents"] for row in csv.DictReader(handle)] == ["2", "3", "4", "5"]


def test_jets_range_beyond_cap_is_a_schema_error(tmp_path):
    code = run(["jets", "--family", "Cn", "--range", "2..20", "--output", str(tmp_path / "r.json")])
    assert code == EXIT_SCHEMA


def test_no_timestamp_reports_are_identical(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["construct", "--family", "mero-equal", "--n", "3", "--k", "2", "--seed", "7", "--no-timestamp"]
    assert run(argv + ["--output", str(first)]) == EXIT_PASS
    assert run(argv + ["--output", str(second)]) == EXIT_PASS
    assert first.read_text(encoding="utf-8") == second.read_text(encoding="utf-8")
    assert _load(first)["generated_at"] is None


def test_config_file_values_yield_to_flags(tmp_path):
    config = tmp_path / "run.env"
    config.write_text("family=holo-equal\nn=3\nk=2\na=0.9\nradius=0.5\n", encoding="utf-8")
    args = build_parser().parse_args(["construct", "--config", str(config), "--a", "0.5"])
    options = merged_options(args)
    run_config = build_run_config(options)
    assert run_config.family == "holo-equal"
    assert run_config.a[0].to_complex() == 0.5
    assert run_config.grid.radius == 0.5


def test_config_file_rejects_unknown_keys(tmp_path):
    config = tmp_path / "run.env"
    config.write_text("colour=blue\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_config_file(str(config))
    code = run(["construct", "--config", str(config)])
    assert code == EXIT_SCHEMA


def test_nevanlinna_logderiv_check(tmp_path):
    out = tmp_path / "nev.json"
    code = run(["nevanlinna", "--defect-check", "logderiv", "--f", "builtin:exp", "--radii", "2,4",
                "--output", str(out)])
    assert code == EXIT_PASS
    data = _load(out)["results"][0]["data"]
    assert data["logderiv"]["violations"] == 0


def test_nevanlinna_unknown_builtin(tmp_path):
    code = run(["nevanlinna", "--f", "builtin:nope", "--radii", "1,2", "--output", str(tmp_path / "r.json")])
    assert code == EXIT_PARAMETER


def test_elliptic_functions_bind_to_the_shared_context():
    context = default_context()
    f = resolve_function("(compose (wp) (+ z 0.1))")
    assert any(getattr(node, "context", None) is context for node in walk(f))
    members = resolve_tuple("(wp); (wp-prime)")
    assert [node.context for node in members] == [context, context]


def test_run_config_schema_carries_a_valid_example():
    example = RunConfig.model_json_schema()["example"]
    assert example["family"] == "holo-equal"
    config = RunConfig.model_validate(example)
    assert config.n == 3
    assert config.a[0].re == 0.5
