import json

import numpy as np
import pytest

from tentlab.cli import main
from tentlab.harness.config import packaged_config


def _lines(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith("{")]


def test_assemble(tmp_path, capsys):
    out = tmp_path / "op.npz"
    assert main(["assemble", "--N", "32", "--kind", "scalar_checkerboard", "--params", '{"lo": 1, "hi": 10}',
                 "--out", str(out)]) == 0
    rec = _lines(capsys)[0]
    assert rec["size"] == 32 and rec["lambda0"] == pytest.approx(1.0)
    assert np.load(out)["matrix"].shape == (32, 32)


def test_solve_then_norm(tmp_path, capsys):
    u, f = tmp_path / "u.npz", tmp_path / "f.npz"
    assert main(["solve", "--N", "64", "--out", str(u), "--source-out", str(f)]) == 0
    capsys.readouterr()
    assert main(["norm", str(f), "--kind", "tent", "--p", "1"]) == 0
    assert main(["norm", str(u), "--kind", "tinfty", "--beta", "1"]) == 0
    recs = _lines(capsys)
    assert len(recs) == 2 and all(r["value"] >= 0 for r in recs)


def test_decay(capsys):
    assert main(["decay", "--N", "128", "--times", "0.001,0.004", "--separations", "0.1,0.2,0.3"]) == 0
    rec = _lines(capsys)[0]
    assert rec["family"] == "semigroup" and rec["used"] == 6 and rec["M_hat"] > 2


def test_verify(capsys):
    assert main(["verify", "--N", "64", "--fields", "2", "--sources", "1"]) == 0
    assert _lines(capsys)[-1]["passed"] is True


def test_run_sweep_report(tmp_path, capsys):
    cfg = str(packaged_config("example"))
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--workers", "1"]) == 0
    capsys.readouterr()
    assert main(["report", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out
    assert "sweep" in out and "PASS" in out


def test_report_exponents(capsys):
    assert main(["report", "--exponents", "1", "2", "2", "2", "0", "1", "1"]) == 0
    assert _lines(capsys)


def test_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "operators": [], "pairs": [[2, 0]]}))
    assert main(["run", "--config", str(bad)]) == 2
    assert "operators" in capsys.readouterr().err
    assert main(["norm", str(tmp_path / "none.npz")]) == 2
