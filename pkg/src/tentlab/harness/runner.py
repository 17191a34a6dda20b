"""Run a config: dispatch checks to workers, collect records, persist them.

Records are written as sorted-key JSON lines. They carry the config hash,
the seed and the package version but no timings, so two runs of one config
produce byte-identical record files. Wall-clock timings go to a separate
``timings.json``.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import __version__
from .acceptance import CHECKS
from .config import CHECK_NAMES, annotate_pairs, canonical_json, config_hash

log = logging.getLogger(__name__)

ENV_OUTPUT = "TENTLAB_OUTPUT_DIR"
ENV_WORKERS = "TENTLAB_WORKERS"


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``nan``, ``inf``, ``-inf``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def sweep_params(config: dict, coefficient: dict) -> dict:
    """Parameters of the sweep check for one coefficient field."""
    extra = config["checks"].get("sweep", {})
    return {
        "coefficients": [coefficient],
        "N": config["grid"]["N"],
        "pairs": config["pairs"],
        "time_grid": config["time_grid"],
        "operators": config["operators"],
        "battery": config["battery"],
        "p_minus": config["p_minus"],
        "force": config["force"],
        "dim": config["grid"]["dim"],
        "period": config["grid"]["period"],
        "m": config["m"],
        "drift": config["tolerances"]["drift"],
        **extra,
    }


def plan_tasks(config: dict) -> list[tuple[str, dict]]:
    """Ordered (check, params) list. Without a ``checks`` block only the sweep runs."""
    names = [n for n in CHECK_NAMES if n in config["checks"]] or ["sweep"]
    tasks = []
    for name in names:
        if name == "sweep":
            tasks.extend(("sweep", sweep_params(config, c)) for c in config["coefficients"])
        else:
            tasks.append((name, config["checks"][name]))
    return tasks


def _run_task(args: tuple[str, dict, int]) -> tuple[list[dict], float]:
    name, params, seed = args
    t0 = time.perf_counter()
    records = CHECKS[name](params, seed)
    return records, time.perf_counter() - t0


def _merge_sweep(parts: list[list[dict]]) -> list[dict]:
    out = []
    ok = True
    worst = 0.0
    for recs in parts:
        for r in recs:
            if r.get("kind") == "summary":
                r = dict(r, kind="group")
                ok &= r["passed"]
                worst = max(worst, r["worst_drift"])
            out.append(r)
    out.append({"check": "sweep", "kind": "summary", "passed": bool(ok), "worst_drift": worst,
                "groups": len(parts)})
    return out


@dataclass
class RunResult:
    records: list
    summaries: dict
    out_dir: Path | None
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s["passed"] for s in self.summaries.values())


def run_experiment(config: dict, out_dir: str | os.PathLike | None = None, workers: int | None = None) -> RunResult:
    """Run every task of a validated config and persist the records.

    ``out_dir`` defaults to ``$TENTLAB_OUTPUT_DIR`` and then to the config's
    ``output`` entry; ``workers`` to ``$TENTLAB_WORKERS`` and then to the
    config. Pass ``out_dir=False`` to skip writing.
    """
    if out_dir is None:
        out_dir = os.environ.get(ENV_OUTPUT, config["output"])
    if workers is None:
        workers = int(os.environ.get(ENV_WORKERS, config["workers"]))
    seed = config["seed"]
    digest = config_hash(config)
    tasks = plan_tasks(config)
    jobs = [(name, params, seed) for name, params in tasks]
    log.info("running %d tasks on %d worker(s)", len(jobs), workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, jobs))
    else:
        results = [_run_task(j) for j in jobs]
    timings = {}
    grouped: dict[str, list] = {}
    for (name, _), (recs, dt) in zip(tasks, results):
        grouped.setdefault(name, []).append(recs)
        timings[name] = timings.get(name, 0.0) + dt
    envelope = {"config_hash": digest, "seed": seed, "version": __version__}
    records, summaries = [], {}
    pair_info = annotate_pairs(config)
    records.append({**envelope, "check": "config", "kind": "pairs", "pairs": pair_info})
    for name, parts in grouped.items():
        recs = _merge_sweep(parts) if name == "sweep" else parts[0]
        for r in recs:
            rec = to_jsonable({**envelope, **r})
            records.append(rec)
            if r.get("kind") == "summary":
                summaries[name] = rec
    result = RunResult(records, summaries, None, timings)
    if out_dir is not False:
        result.out_dir = write_results(result, config, Path(out_dir))
    return result


def write_results(result: RunResult, config: dict, out_dir: Path) -> Path:
    """Serialize records, the summary table, the canonical config and timings."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "records.jsonl", "w") as fh:
            for rec in result.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        with open(out_dir / "summary.tsv", "w") as fh:
            fh.write("check\tpassed\tdetail\n")
            for name, rec in result.summaries.items():
                detail = {k: v for k, v in rec.items()
                          if k not in ("check", "kind", "passed", "config_hash", "seed", "version")}
                fh.write(f"{name}\t{'PASS' if rec['passed'] else 'FAIL'}\t{json.dumps(detail, sort_keys=True)}\n")
        (out_dir / "config.json").write_text(canonical_json(config) + "\n")
        (out_dir / "timings.json").write_text(json.dumps(result.timings, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"{out_dir}: cannot write results: {exc.strerror}") from exc
    return out_dir


def read_records(path: str | os.PathLike) -> list[dict]:
    """Load ``records.jsonl`` from a results directory or a file path."""
    path = Path(path)
    if path.is_dir():
        path = path / "records.jsonl"
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
