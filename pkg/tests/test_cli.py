import csv
import json

import pytest

from etisac.cli import main, parse_sweep
from etisac.errors import ScenarioError


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_sweep_inclusive():
    assert parse_sweep("d_o_m=20:200:45") == ("d_o_m", [20.0, 65.0, 110.0, 155.0, 200.0])
    assert parse_sweep("gamma_db=0:1:0.1")[1][-1] == 1.0
    assert parse_sweep("k=8:4:1") == ("k", [])
    for bad in ("d_o_m=1:2", "foo=1:2:1", "k=1:2:0", "k"):
        with pytest.raises(ScenarioError):
            parse_sweep(bad)


def test_crb_sweep_with_hold(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text("sensing: {radar_snr_hold: true}\ntarget: {normalize: true}\n")
    assert main(["crb-sweep", "--scenario", str(scen), "--sweep", "d_o_m=20:200:90", "--out", str(tmp_path / "r")]) == 0
    rows = _csv(tmp_path / "r" / "crb_sweep.csv")
    assert [float(r["d_o_m"]) for r in rows] == [20.0, 110.0, 200.0]
    ratios = [float(r["crb_phi"]) / float(r["pt_crb_phi"]) for r in rows]
    assert ratios[0] > ratios[-1] and abs(ratios[-1] - 1) < 0.1
    diag = json.loads((tmp_path / "r" / rows[0]["diagnostics"]).read_text())
    assert len(diag["u"]) == 8
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert manifest["command"] == "crb-sweep" and "version" in manifest


def test_empty_sweep_writes_header_only(tmp_path):
    assert main(["crb-sweep", "--sweep", "d_o_m=30:20:1", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "crb_sweep.csv").read_text()
    assert text.count("\n") == 1 and text.startswith("d_o_m,crb_d")


def test_k_sweep_smooth(tmp_path):
    assert main(["crb-sweep", "--sweep", "k=4:10:2", "--out", str(tmp_path)]) == 0
    rows = _csv(tmp_path / "crb_sweep.csv")
    vals = [float(r["crb_phi"]) for r in rows]
    assert all(r["status"] == "ok" for r in rows) and all(v > 0 for v in vals)
    assert max(vals) / min(vals) < 1.001


def test_degenerate_point_is_marked_not_fatal(tmp_path):
    # two mirror-image subsections share one contour intermediate at broadside
    assert main(["crb-sweep", "--sweep", "k=2:4:2", "--out", str(tmp_path)]) == 3
    rows = _csv(tmp_path / "crb_sweep.csv")
    assert rows[0]["status"] == "error:DegenerateFim" and rows[1]["status"] == "ok"


def test_design_outputs(tmp_path):
    assert main(["design", "--method", "zf", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "design.json").read_text())
    assert len(doc["beampattern"]) == 181
    assert len(doc["info"]["direction_set"]) == 4
    assert min(doc["sinrs_db"]) >= 10 - 1e-5
    assert len(_csv(tmp_path / "beampattern.csv")) == 181


def test_design_infeasible_exit_code(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text("constraints: {gamma_db: 40}\n")
    assert main(["design", "--method", "zf", "--scenario", str(scen), "--out", str(tmp_path / "r")]) == 2
    doc = json.loads((tmp_path / "r" / "design.json").read_text())
    assert doc["status"] == "infeasible" and doc["constraint_class"] == "sinr"


def test_bad_scenario_exit_code(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text("array: {n_t: 32}\n")
    assert main(["validate", "--scenario", str(scen), "--out", str(tmp_path / "r")]) == 4
    assert main(["crb-sweep", "--sweep", "zz=1:2:1", "--out", str(tmp_path / "q")]) == 4


def test_mse_outputs(tmp_path):
    assert main(["mse", "--method", "isotropic", "--trials", "50", "--seed", "3", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "mse.json").read_text())
    assert doc["n_trials"] == 50 and doc["rmse"] >= doc["root_crb"]
    assert len(_csv(tmp_path / "trials.csv")) == 50


def test_compare_partial_failure(tmp_path):
    # the high-threshold point is infeasible for both pipelines, the low one is not
    assert main(["compare", "--sweep", "gamma_db=10:40:30", "--out", str(tmp_path)]) == 3
    rows = _csv(tmp_path / "compare.csv")
    assert rows[0]["status"] == "ok" and float(rows[0]["zf_crb_phi"]) >= float(rows[0]["sdr_crb_phi"])
    assert "infeasible" in rows[1]["status"]


def test_compare_nlos_low_gamma_zf_rate(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text("users: {los_fraction: null}\n")
    assert main(["compare", "--scenario", str(scen), "--sweep", "gamma_db=0:0:1", "--out", str(tmp_path / "r")]) == 0
    row = _csv(tmp_path / "r" / "compare.csv")[0]
    assert float(row["zf_sum_rate"]) >= float(row["sdr_sum_rate"]) * (1 - 1e-6)


def test_workers_match_sequential(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["crb-sweep", "--sweep", "d_o_m=20:80:20", "--out", str(a)]) == 0
    assert main(["crb-sweep", "--sweep", "d_o_m=20:80:20", "--workers", "2", "--out", str(b)]) == 0
    assert (a / "crb_sweep.csv").read_bytes() == (b / "crb_sweep.csv").read_bytes()
