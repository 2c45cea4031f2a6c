import math

import pytest

from fermatlab.utils.helpers import (
    log_plus,
    parse_complex,
    parse_complex_list,
    parse_float_list,
    parse_int_list,
    parse_range,
    run_id,
    thread_cap,
)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("0.5", 0.5 + 0j),
        ("-1+2j", complex(-1, 2)),
        ("0.3-0.1i", complex(0.3, -0.1)),
        ("(0.3,0.1)", complex(0.3, 0.1)),
        (" 2 ", 2 + 0j),
    ],
)
def test_parse_complex(text, expected):
    assert parse_complex(text) == pytest.approx(expected)


def test_parse_complex_rejects_garbage():
    with pytest.raises(ValueError):
        parse_complex("half")


def test_parse_complex_list_separators():
    assert parse_complex_list("0.5,0.25") == [0.5, 0.25]
    assert parse_complex_list("(0.3,0.1);(0,1)") == [complex(0.3, 0.1), 1j]
    assert parse_complex_list("") == []


def test_parse_number_lists():
    assert parse_int_list("3,4 5") == [3, 4, 5]
    assert parse_float_list("2, 4,8") == [2.0, 4.0, 8.0]


@pytest.mark.parametrize("text", ["3..12", "3-12", "3:12", " 3 .. 12 "])
def test_parse_range(text):
    assert parse_range(text) == (3, 12)


def test_parse_range_rejects_open_range():
    with pytest.raises(ValueError):
        parse_range("3..")


def test_run_id_is_stable_and_order_free():
    a = run_id({"command": "jets", "family": "Cn", "range": [2, 6]})
    b = run_id({"range": [2, 6], "family": "Cn", "command": "jets"})
    assert a == b
    assert len(a) == 16
    assert a != run_id({"command": "jets", "family": "Cn", "range": [2, 7]})


def test_thread_cap_reads_environment(monkeypatch):
    monkeypatch.setenv("FERMATLAB_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("FERMATLAB_THREADS", "0")
    assert thread_cap() == 1
    monkeypatch.setenv("FERMATLAB_THREADS", "many")
    assert thread_cap() >= 1


def test_log_plus():
    assert log_plus(0.5) == 0.0
    assert log_plus(1.0) == 0.0
    assert log_plus(math.e) == pytest.approx(1.0)
