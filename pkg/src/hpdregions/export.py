"""Writing and reading experiment outputs.

``out_dir`` receives

* ``summary.json``  -- the coverage summary,
* ``records.jsonl`` -- one trial record per line,
* ``curves.csv``    -- ``checkpoint,kind,coverage,beta_lo,beta_hi,vol_mean,vol_std``,
* ``regions.csv``   -- one row per (trial, checkpoint, region kind).

Floats are written with ``repr`` precision, which round-trips exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable

from .harness import CoverageSummary, TrialRecord

CURVES_HEADER = ["checkpoint", "kind", "coverage", "beta_lo", "beta_hi", "vol_mean", "vol_std"]
REGIONS_HEADER = ["trial", "checkpoint", "kind", "volume", "contains"]


class ExportError(OSError):
    pass


def _dumps(obj: Any) -> str:
    return json.dumps(obj, allow_nan=False, separators=(",", ":"))


def _cell(x) -> str:
    return "" if x is None else repr(x) if isinstance(x, float) else str(x)


def export_records(records: Iterable[TrialRecord], summary: CoverageSummary, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    records = list(records)
    paths = {
        "summary": out / "summary.json",
        "records": out / "records.jsonl",
        "curves": out / "curves.csv",
        "regions": out / "regions.csv",
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths["summary"].write_text(json.dumps(summary.to_dict(), indent=1, allow_nan=False) + "\n")
        with paths["records"].open("w") as fh:
            for r in records:
                fh.write(_dumps(r.to_dict()) + "\n")
        with paths["curves"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVES_HEADER)
            for e in summary.coverage:
                w.writerow([_cell(getattr(e, k)) for k in CURVES_HEADER])
        with paths["regions"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REGIONS_HEADER)
            for r in records:
                for cp in r.checkpoints:
                    for g in cp.regions:
                        w.writerow([r.trial_id, cp.checkpoint, g.kind, _cell(g.volume), int(g.contains)])
    except OSError as exc:
        raise ExportError(f"cannot write results to {out}: {exc}") from exc
    return paths


def load_records(path) -> list[TrialRecord]:
    with Path(path).open() as fh:
        return [TrialRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def load_summary(path) -> CoverageSummary:
    return CoverageSummary.from_dict(json.loads(Path(path).read_text()))


def write_demo(snapshots: list[dict], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in snapshots:
        p = out / f"demo_{snap['checkpoint']:05d}.json"
        p.write_text(_dumps(snap) + "\n")
        paths.append(p)
    return paths
