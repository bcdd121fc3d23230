import math

from dpnash.reporting import ExperimentReport, Table, format_value, parse_csv, values_match


def test_format_value():
    assert format_value(True) == "1"
    assert format_value(3) == "3"
    assert format_value(0.1 + 0.2) == "0.3"
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value(float("nan")) == "nan"
    assert format_value(None) == ""
    assert format_value("ok") == "ok"


def test_csv_roundtrip(tmp_path):
    t = Table(["sigma", "run", "x", "status"], [
        {"sigma": 1.0, "run": 0, "x": 1.5e-7, "status": "ok"},
        {"sigma": 2.0, "run": 1, "x": float("nan"), "status": "diverged"},
    ])
    text = t.to_csv("dpnash/test-runs/1")
    assert text.splitlines()[0] == "# dpnash/test-runs/1"
    assert "\r" not in text
    rows = parse_csv(text)
    assert rows[0] == {"sigma": 1, "run": 0, "x": 1.5e-7, "status": "ok"}
    assert math.isnan(rows[1]["x"])

    rep = ExperimentReport("test", t, Table(["n"], [{"n": 2}]), extra={"more": t}, version="0")
    paths = rep.write(tmp_path)
    assert sorted(p.name for p in paths.values()) == [
        "test_aggregate.csv", "test_more.csv", "test_runs.csv", "test_summary.json"]
    assert paths["runs"].read_bytes() == text.encode()


def test_values_match():
    assert values_match(1.0, 1.0 + 1e-12)
    assert not values_match(1.0, 1.001)
    assert values_match(float("nan"), float("nan"))
    assert not values_match(None, 0.0)
    assert values_match("a", "a")
