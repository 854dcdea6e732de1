"""Verdict-table serialization: versioned CSV/NDJSON plus the run manifest.

Result files are byte-deterministic for a fixed (config, seed, version):
rows are emitted in canonical order and floats via repr. The manifest is the
one file allowed to vary (it carries wall time) and is excluded from the
byte-identity contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

SCHEMA = "shelab-results/1"


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    resolution: str
    statistic: str
    value: float
    stderr: float
    verdict: str  # PASS | FAIL | INFO | DEGENERATE


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(float(v))


def render_csv(records) -> str:
    lines = [f"# schema={SCHEMA}",
             "experiment,resolution,statistic,value,stderr,verdict"]
    for r in records:
        lines.append(",".join([r.experiment, r.resolution, r.statistic,
                               _fmt(r.value), _fmt(r.stderr), r.verdict]))
    return "\n".join(lines) + "\n"


def render_ndjson(records) -> str:
    lines = [json.dumps({"schema": SCHEMA}, sort_keys=True)]
    for r in records:
        d = asdict(r)
        d["value"] = float(d["value"])
        d["stderr"] = float(d["stderr"])
        lines.append(json.dumps(d, sort_keys=True))
    return "\n".join(lines) + "\n"


def write_records(records, out_dir, fmt: str, stem: str = "results") -> str:
    import os

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{stem}.{'csv' if fmt == 'csv' else 'ndjson'}")
    text = render_csv(records) if fmt == "csv" else render_ndjson(records)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_manifest(out_dir, *, config_hash: str, version: str, verdicts: dict,
                   wall_time: float) -> str:
    import os

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    payload = {"schema": "shelab-manifest/1", "config_hash": config_hash,
               "version": version, "verdicts": dict(sorted(verdicts.items())),
               "wall_time_seconds": wall_time}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def overall_exit_code(records) -> int:
    """0 when no FAIL verdicts, 2 otherwise (1 is reserved for errors)."""
    return 2 if any(r.verdict == "FAIL" for r in records) else 0
