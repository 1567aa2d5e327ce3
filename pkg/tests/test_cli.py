import math
import subprocess
import sys
from pathlib import Path

import pytest

from pinchflow.cli import COLUMNS, main, read_csv
from pinchflow.estimates import EstimateReport

SMALL = """
name = small-bump
geometry.kind = productCircle
geometry.n = 5
geometry.r = 0.5
geometry.R = 1.0
geometry.bumpAmplitude = 0.1
geometry.N = 64
flow.tEnd = 0.002
monitors = pinching, positionBound, gradientRatio, neck
"""

# S^4(2.5) x S^1(1): the circle dies first, so |A|^2/|H|^2 rises from 0.4607
RISING = """
name = ratio-rises
pinching.c = 0.461
geometry.kind = productCircle
geometry.n = 5
geometry.r = 2.5
geometry.R = 1.0
geometry.N = 64
flow.tEnd = 0.01
monitors = pinching
"""


def _cfg(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_verify_exit_codes(capsys):
    assert main(["verify", "--suite", "algebraic", "--samples", "2000", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "pass = true" in out and "samples = 2000" in out
    assert main(["verify", "--suite", "algebraic", "--samples", "500", "--seed", "7", "--invert-inequality"]) == 1
    assert main(["verify", "--suite", "simons", "--samples", "100", "--seed", "1"]) == 0
    assert main(["verify", "--suite", "nope", "--samples", "10"]) == 2
    assert main(["verify", "--suite", "kato", "--samples", "0"]) == 2
    assert main([]) == 2


def test_verify_report_file(tmp_path):
    out = tmp_path / "v.txt"
    assert main(["verify", "--suite", "oracle", "--samples", "6", "--seed", "3", "--out", str(out)]) == 0
    rep = EstimateReport.from_text(out.read_text())
    assert rep.values["suite"] == "oracle" and rep.values["worstOrder"] >= 1.9


def test_run_writes_series_and_report(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", _cfg(tmp_path, SMALL), "--out", str(out)]) == 0
    header = (out / "series.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == COLUMNS
    rows = read_csv(out / "series.csv")
    assert rows and all(r["event"] == "Step" for r in rows)
    assert all(r["minQ"] > 0 and r["gradRatio"] >= 0 for r in rows)
    rep = EstimateReport.from_text((out / "report.txt").read_text())
    assert rep.values["status"] == "completed" and rep.values["exitCode"] == 0
    assert rep.values["pinching.pass"] and rep.values["positionBound.pass"]
    assert main(["report", "--in", str(out)]) == 0


def test_run_is_deterministic(tmp_path):
    cfg = _cfg(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


def test_run_invariant_violation_exits_1(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", _cfg(tmp_path, RISING), "--out", str(out)]) == 1
    rows = read_csv(out / "series.csv")
    assert any(r["event"] == "InvariantViolation" for r in rows)
    assert main(["report", "--in", str(out)]) == 1


def test_run_config_errors_exit_2(tmp_path):
    bad = SMALL.replace("geometry.bumpAmplitude = 0.1", "geometry.bumpAmplitude = -1.5")
    assert main(["run", "--config", _cfg(tmp_path, bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")]) == 2
    # not pinched at t = 0 for the requested slope
    unp = SMALL.replace("name = small-bump", "name = x\npinching.c = 0.2")
    assert main(["run", "--config", _cfg(tmp_path, unp), "--out", str(tmp_path / "o")]) == 2
    assert main(["report", "--in", str(tmp_path / "empty")]) == 2


def test_model_scenario(tmp_path):
    out = tmp_path / "m"
    cfg = Path(__file__).resolve().parents[1] / "scenarios" / "sphere_catalog.cfg"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "series.csv")
    assert rows[-1]["event"] == "SingularityDetected"
    assert all(abs(r["maxRatio"] - 0.2) < 1e-15 for r in rows)
    rep = EstimateReport.from_text((out / "report.txt").read_text())
    assert rep.values["lifespan"] == rep.values["lifespanBound"] == pytest.approx(0.1)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pinchflow", "verify", "--suite", "simons", "--samples", "5"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "suite = simons" in r.stdout


def test_product_exact_scenario(tmp_path):
    cfg = Path(__file__).resolve().parents[1] / "scenarios" / "product_exact.cfg"
    out = tmp_path / "p"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    ratios = [r["maxRatio"] for r in read_csv(out / "series.csv")]
    assert max(ratios) - min(ratios) <= 1e-6
    assert abs(ratios[0] - 0.4) <= 1e-6  # (4/4 + 1) / (16/4 + 1)
