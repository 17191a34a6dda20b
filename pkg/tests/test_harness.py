import json

import pytest

from tentlab.harness.config import ConfigError, config_hash, load_config, packaged_config, validate
from tentlab.harness.runner import plan_tasks, read_records, run_experiment, to_jsonable


def _example():
    return load_config(packaged_config("example"))


def test_packaged_configs_validate():
    for name in ("acceptance", "example"):
        cfg = load_config(packaged_config(name))
        assert cfg["seed"] >= 0 and cfg["operators"]


@pytest.mark.parametrize("patch, where", [
    ({"operators": []}, "operators"),
    ({"operators": ["L2"]}, "operators/0"),
    ({"pairs": [[2]]}, "pairs/0"),
    ({"bogus": 1}, "<root>"),
    ({"grid": {"N": [4]}}, "grid/N/0"),
])
def test_schema_errors_name_the_path(patch, where):
    raw = {"seed": 1, "operators": ["L1"], "pairs": [[2, 0]], **patch}
    with pytest.raises(ConfigError) as exc:
        validate(raw, "cfg.json")
    assert str(exc.value).startswith(f"cfg.json: {where}:")


def test_range_errors(tmp_path):
    with pytest.raises(ConfigError, match="t_min"):
        validate({"seed": 1, "operators": ["L1"], "pairs": [[2, 0]], "time_grid": {"t_min": 1, "t_max": 0.5}})
    with pytest.raises(ConfigError, match="2-D"):
        validate({"seed": 1, "operators": ["L1"], "pairs": [[2, 0]], "grid": {"dim": 2, "N": [64]}})
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="bad.json"):
        load_config(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_hash_stable_and_sensitive():
    a, b = _example(), _example()
    b["workers"], b["output"] = 8, "elsewhere"
    assert config_hash(a) == config_hash(b)
    b["seed"] += 1
    assert config_hash(a) != config_hash(b)


def test_plan_without_checks_runs_sweep_only():
    cfg = validate({"seed": 1, "operators": ["L1"], "pairs": [[2, 0]],
                    "coefficients": [{"kind": "identity"}, {"kind": "scalar_checkerboard"}]})
    tasks = plan_tasks(cfg)
    assert [n for n, _ in tasks] == ["sweep", "sweep"]


def test_to_jsonable():
    import math
    from fractions import Fraction
    import numpy as np
    out = to_jsonable({"a": np.float64(math.inf), "b": np.bool_(True), "c": Fraction(1, 3), "d": 1 + 2j,
                       "e": np.arange(2)})
    assert out == {"a": "inf", "b": True, "c": "1/3", "d": {"re": 1.0, "im": 2.0}, "e": [0, 1]}
    json.dumps(out)


def test_runs_are_byte_identical(tmp_path):
    cfg = _example()
    r1 = run_experiment(cfg, tmp_path / "a", workers=1)
    r2 = run_experiment(cfg, tmp_path / "b", workers=2)
    a = (tmp_path / "a" / "records.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "records.jsonl").read_bytes()
    assert r1.passed == r2.passed
    recs = read_records(tmp_path / "a")
    assert all(r["config_hash"] == config_hash(cfg) and r["seed"] == cfg["seed"] for r in recs)
    assert recs[0]["kind"] == "pairs"
    assert {"sweep", "exponents"} <= set(r1.summaries)
    for f in ("summary.tsv", "config.json", "timings.json"):
        assert (tmp_path / "a" / f).exists()
    assert not any(k in r for r in recs for k in ("timings", "elapsed", "seconds"))


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("TENTLAB_OUTPUT_DIR", str(tmp_path / "env"))
    res = run_experiment(_example())
    assert res.out_dir == tmp_path / "env" and (tmp_path / "env" / "records.jsonl").exists()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="cannot write"):
        run_experiment(_example(), blocker / "sub")
