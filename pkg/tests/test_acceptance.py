"""Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL line each.

The packaged acceptance config is run once per session; the determinism
criterion reruns it into a second directory and compares record bytes.
Run directly (``python3 tests/test_acceptance.py``) to print only the lines.
"""
import json
import math

import pytest

from tentlab.harness.config import load_config, packaged_config
from tentlab.harness.runner import run_experiment

LINES: list[str] = []

CRITERIA = [
    (1, "identities", "exact discrete identities <= 1e-8 on >= 100 instances, under 5 min"),
    (2, "spectral", "semigroup eigenvalues vs exp(-t lambda_k) to 1e-8 at 8 times"),
    (3, "decay", "off-diagonal order M_hat >= 5, residual < 0.5, adjoint within 15%"),
    (4, "fubini", "p = 2 tent norm over weighted L2 in [0.9, 1.1]"),
    (5, "aperture", "aperture slopes within the n/2, n/p band +- 0.3"),
    (6, "sweep", "battery-max drift < 2 between N = 128 and 256, under 30 min"),
    (7, "trace", "Whitney and slice slopes >= beta + 1/2 - 0.1"),
    (8, "inequalities", "inequality ratios finite and stable within +-50%"),
    (9, "exponents", "exact critical exponents and symbolic case boundary"),
]
RUNTIME_LIMIT = {"identities": 300.0, "sweep": 1800.0}


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {num:>2} {name}: {detail}")
    print(LINES[-1])


@pytest.fixture(scope="module")
def acceptance(tmp_path_factory):
    config = load_config(packaged_config("acceptance"))
    out = tmp_path_factory.mktemp("acceptance")
    return config, run_experiment(config, out_dir=out, workers=1)


def _finite(obj) -> bool:
    if isinstance(obj, dict):
        return all(_finite(v) for v in obj.values())
    if isinstance(obj, list):
        return all(_finite(v) for v in obj)
    if isinstance(obj, float):
        return math.isfinite(obj)
    return obj not in ("nan", "inf", "-inf")


@pytest.mark.parametrize("num, name, text", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(acceptance, num, name, text):
    _, result = acceptance
    summary = result.summaries[name]
    ok = bool(summary["passed"])
    if name in RUNTIME_LIMIT:
        ok &= result.timings[name] < RUNTIME_LIMIT[name]
    if name == "inequalities":
        metrics = [r for r in result.records if r["check"] == name and r["kind"] != "summary"]
        ok &= _finite(metrics)
    detail = {k: v for k, v in summary.items() if k not in ("check", "kind", "config_hash", "seed", "version")}
    _report(num, name, ok, f"{text}; {json.dumps(detail, sort_keys=True)[:400]}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def test_determinism(acceptance, tmp_path):
    config, first = acceptance
    second = run_experiment(config, out_dir=tmp_path / "rerun", workers=2)
    a = (first.out_dir / "records.jsonl").read_bytes()
    b = (second.out_dir / "records.jsonl").read_bytes()
    ok = a == b
    _report(10, "determinism", ok, f"rerun records.jsonl identical ({len(a)} bytes, 1 vs 2 workers)")
    assert ok


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    cfg = load_config(packaged_config("acceptance"))
    with tempfile.TemporaryDirectory() as tmp:
        res = run_experiment(cfg, out_dir=Path(tmp) / "a", workers=1)
        for num, name, text in CRITERIA:
            try:
                test_criterion((cfg, res), num, name, text)
            except AssertionError:
                pass
        try:
            test_determinism((cfg, res), Path(tmp))
        except AssertionError:
            pass
    sys.exit(0 if all(line.startswith("PASS") for line in LINES) else 1)
