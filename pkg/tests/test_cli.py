from __future__ import annotations

import json
import math

import pytest

from potts_af.cli import fmt_float, main


def run_cli(*args: str) -> int:
    return main(list(args))


def test_fmt_float():
    assert fmt_float(math.inf) == "inf"
    assert fmt_float(-math.inf) == "-inf"
    assert float(fmt_float(0.1)) == 0.1
    assert float(fmt_float(1.0 / 3.0)) == 1.0 / 3.0
    with pytest.raises(ValueError):
        fmt_float(math.nan)


def test_phase_diagram_low_connectivity_all_inf(tmp_path):
    out = tmp_path / "pd.csv"
    assert run_cli("phase-diagram", "--q", "2", "--c-min", "0", "--c-max", "1",
                   "--c-step", "0.25", "--out", str(out)) == 0
    text = out.read_text()
    assert "# schema: potts-af/1" in text
    assert "c_rs_loc=1 c_ent=2 c_1=2.7725887222397811" in text
    data_rows = [l for l in text.splitlines() if l and not l.startswith("#") and l[0].isdigit()]
    for row in data_rows:
        cols = row.split(",")
        assert cols[1:] == ["inf", "inf", "inf", "inf"]


def test_phase_diagram_known_row(tmp_path):
    out = tmp_path / "pd9.csv"
    run_cli("phase-diagram", "--q", "2", "--c-min", "9", "--c-max", "9",
            "--c-step", "1", "--out", str(out))
    row = [l for l in out.read_text().splitlines() if l.startswith("9")][0]
    cols = row.split(",")
    assert float(cols[1]) == pytest.approx(math.log(2), abs=1e-14)
    assert float(cols[2]) == pytest.approx(math.log(2), abs=1e-14)


def test_pressure_zero_connectivity(tmp_path):
    out = tmp_path / "p.json"
    assert run_cli("pressure", "--q", "3", "--beta", "1", "--c", "0", "--n", "2",
                   "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "potts-af/1"
    assert doc["estimate"]["value"] == pytest.approx(math.log(3), abs=1e-14)
    assert doc["gap"] == 0


def test_pressure_single_site_law(tmp_path):
    out = tmp_path / "p1.json"
    run_cli("pressure", "--q", "2", "--beta", "2", "--c", "3", "--n", "1",
            "--eps", "1e-10", "--out", str(out))
    doc = json.loads(out.read_text())
    assert doc["estimate"]["value"] == pytest.approx(math.log(2) - 3.0, abs=1e-9)
    assert doc["gap"] >= -1e-9


def test_pressure_budget_error_record(tmp_path):
    out = tmp_path / "bad.json"
    code = run_cli("pressure", "--q", "3", "--beta", "1", "--c", "1", "--n", "12",
                   "--out", str(out))
    assert code == 1
    doc = json.loads(out.read_text())
    assert doc["error"]["type"] == "BudgetExceededError"


def test_rs_scan_summary(tmp_path):
    out = tmp_path / "rs.csv"
    assert run_cli("rs-scan", "--q", "2", "--beta", "1", "--c", "9",
                   "--t-points", "41", "--out", str(out)) == 0
    text = out.read_text()
    assert "instability=true" in text
    rows = [l for l in text.splitlines() if not l.startswith("#")][1:]
    assert len(rows) == 41


def test_second_moment_json(tmp_path):
    out = tmp_path / "sm.json"
    assert run_cli("second-moment", "--q", "2", "--beta", "0.4", "--c", "4",
                   "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["certified"] is True
    assert doc["t_star"] == 1
    assert doc["beta_star_certified"] == pytest.approx(math.log(3), abs=1e-12)


def test_sum_rule_json(tmp_path):
    out = tmp_path / "sr.json"
    assert run_cli("sum-rule", "--q", "2", "--beta", "1", "--c", "1", "--n", "2",
                   "--r-max", "12", "--quad-points", "8", "--seed", "3",
                   "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["discrepancy"] <= doc["error_budget"]


def test_cascade_closed_form_json(tmp_path):
    out = tmp_path / "ca.json"
    assert run_cli("cascade", "--q", "2", "--beta", "1", "--c", "4", "--n", "3",
                   "--m-list", "1", "--hierarchy", "uniform",
                   "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["bound"] == pytest.approx(doc["annealed_pressure"], abs=1e-12)
    assert doc["bound_minus_pressure"] >= -1e-9


def test_config_file_supplies_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"beta": 1.0, "c": 0.0, "n": 2}))
    out = tmp_path / "pc.json"
    assert run_cli("pressure", "--q", "2", "--config", str(cfg), "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["estimate"]["value"] == pytest.approx(math.log(2), abs=1e-14)
    # explicit flag wins over the config value
    out2 = tmp_path / "pc2.json"
    run_cli("pressure", "--q", "3", "--config", str(cfg), "--c", "0",
            "--out", str(out2))
    assert json.loads(out2.read_text())["q"] == 3


def test_missing_parameter_is_structured_error(tmp_path):
    out = tmp_path / "m.json"
    code = run_cli("pressure", "--q", "2", "--out", str(out))
    assert code == 1
    assert "missing required" in json.loads(out.read_text())["error"]["message"]


def test_no_nan_in_outputs(tmp_path):
    for name, args in {
        "pd": ["phase-diagram", "--q", "3", "--c-min", "0", "--c-max", "8",
               "--c-step", "2"],
        "sm": ["second-moment", "--q", "3", "--beta", "2", "--c", "30"],
    }.items():
        out = tmp_path / f"{name}.out"
        assert run_cli(*args, "--out", str(out)) == 0
        assert "nan" not in out.read_text().lower()


def test_same_seed_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    args = ["pressure", "--q", "2", "--beta", "1.5", "--c", "3", "--n", "4",
            "--seed", "99"]
    assert run_cli(*args, "--out", str(out1)) == 0
    assert run_cli(*args, "--out", str(out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()
