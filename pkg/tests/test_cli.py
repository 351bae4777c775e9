import json

import pytest

import cvswitch
from conftest import CONFIG_DIR


def test_capacity(capsys):
    assert cvswitch.main(["capacity", "--eta", "0.5"]) == 0
    assert capsys.readouterr().out.strip() == "1.000000"


def test_capacity_rejects_unit_eta(capsys):
    assert cvswitch.main(["capacity", "--eta", "1.0"]) == 1
    assert "eta" in capsys.readouterr().err


def test_region_prints_facets_and_writes_json(tmp_path, capsys):
    out = tmp_path / "region.json"
    assert cvswitch.main(["region", "--scenario", "a", "--p", "0.632", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "0.399424" in text
    assert "any_orientation, p = 0.632" in text
    assert "Binding facets" in text
    data = json.loads(out.read_text())
    assert data["rule"] == "any_orientation"
    assert len(data["bounds"]) == 7


def test_region_from_pnla_and_csv(tmp_path):
    out = tmp_path / "samples.csv"
    code = cvswitch.main(["region", "--scenario", "c", "--pnla", "0.01", "--rule", "parity",
                          "--format", "csv", "--sample-step", "0.5", "--out", str(out)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 1 + 27


def test_region_from_config(capsys):
    assert cvswitch.main(["region", "--config", str(CONFIG_DIR / "heterogeneous.json")]) == 0
    text = capsys.readouterr().out
    assert "heterogeneous links" in text
    assert "λ1 + λ2 + λ3 + λ4" in text


def test_missing_topology_is_usage_error(capsys):
    assert cvswitch.main(["region", "--scenario", "a"]) == 1
    assert cvswitch.main(["region"]) == 1


def test_bad_flag_exits_with_usage_code():
    with pytest.raises(SystemExit) as info:
        cvswitch.main(["region", "--scenario", "z"])
    assert info.value.code == 1


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"users": [1, 2], "links": [{"p": 0.5}], "flows": [{"users": [1, 2]}]}))
    assert cvswitch.main(["region", "--config", str(bad)]) == 2
    assert "Configuration error" in capsys.readouterr().err


def test_simulate_writes_trace_and_verdict(tmp_path, capsys):
    prefix = tmp_path / "run"
    code = cvswitch.main(["simulate", "--scenario", "c", "--p", "0.632", "--lam", "0.1,0.1,0.1",
                          "--steps", "500", "--seed", "3", "--out", str(prefix)])
    assert code == 0
    assert (tmp_path / "run.csv").read_text().startswith("step,q1,q2,q3,qtotal")
    summary = json.loads((tmp_path / "run.json").read_text())
    assert summary["steps"] == 500
    assert "stable" in summary["verdict"]


def test_simulate_rate_count_mismatch(tmp_path):
    code = cvswitch.main(["simulate", "--scenario", "a", "--p", "0.5", "--lam", "0.1,0.1",
                          "--out", str(tmp_path / "x")])
    assert code == 1


def test_sweep_and_plot(tmp_path, capsys):
    prefix = tmp_path / "sweep"
    code = cvswitch.main(["sweep", "--scenario", "c", "--p", "0.632", "--dlam", "0.5", "--steps", "200",
                          "--workers", "1", "--quiet", "--out", str(prefix)])
    assert code == 0
    assert (tmp_path / "sweep.csv").read_text().splitlines()[0] == "lam1,lam2,lam3,slope,stable,inside,agree"
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert summary["points"] == 27
    assert "agreement" in summary

    svg = tmp_path / "sweep.svg"
    code = cvswitch.main(["plot", "--scenario", "c", "--p", "0.632", "--results", str(tmp_path / "sweep.csv"),
                          "--out", str(svg)])
    assert code == 0
    assert svg.read_text().count("<circle") == 27 + 2


def test_sweep_over_cap(capsys):
    code = cvswitch.main(["sweep", "--scenario", "a", "--p", "0.632", "--full-resolution", "--workers", "1", "--quiet"])
    assert code == 3
    assert "exceeds cap" in capsys.readouterr().err


def test_simulate_over_flow_cap(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("CVSWITCH_MAX_FLOWS", "2")
    code = cvswitch.main(["simulate", "--scenario", "a", "--p", "0.5", "--lam", "0.1,0.1,0.1",
                          "--steps", "10", "--out", str(tmp_path / "x")])
    assert code == 3
    assert "Resource cap exceeded" in capsys.readouterr().err


@pytest.mark.parametrize("flag,value", [("--steps", "0"), ("--threshold", "0")])
def test_explicit_zero_is_not_replaced_by_default(tmp_path, capsys, flag, value):
    code = cvswitch.main(["simulate", "--scenario", "c", "--p", "0.5", "--lam", "0.1,0.1,0.1",
                          "--steps", "10", flag, value, "--out", str(tmp_path / "x")])
    assert code == 1
    assert not (tmp_path / "x.csv").exists()


def test_simulate_reports_ebit_throughput(tmp_path):
    prefix = tmp_path / "het"
    code = cvswitch.main(["simulate", "--config", str(CONFIG_DIR / "heterogeneous.json"),
                          "--lam", "0.1,0.1,0.1,0.05", "--steps", "2000", "--seed", "5", "--out", str(prefix)])
    assert code == 0
    summary = json.loads((tmp_path / "het.json").read_text())
    rci = [0.82, 1.0, 0.5, 1.0]
    expected = [x * c for x, c in zip(summary["throughput"], rci)]
    assert summary["ebit_throughput"] == pytest.approx(expected, abs=2e-6)
