"""CSV / JSON export with fixed column schemas.

Every table has a schema tuple below; writers always emit the header, so an
empty run produces header-only files. Column order never depends on the data.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

HEIGHT_COLUMNS = ("height", "round", "commit_time", "created", "latency", "proposer", "n_txs", "block_bytes",
                  "byzantine_leader")
EVIDENCE_COLUMNS = ("time", "kind", "accused", "height", "round", "detail", "byzantine")
REPUTATION_COLUMNS = ("slot", "node", "raw", "normalized")

# figure families
PB_COLUMNS = ("pb", "scheme", "mean_rounds", "stderr", "seeds")
BLOCK_COLUMNS = ("block_txs", "throughput_tps", "latency_s", "mean_rounds")
OFFLOAD_COLUMNS = ("density", "data_bits", "vehicles", "delay_vfc", "delay_ecv", "energy_vfc", "energy_ecv",
                   "saved_energy", "deadline_met")
PSI_COLUMNS = ("psi", "alpha", "theta", "omega", "x", "y", "x_printed", "uav_payoff", "vehicle_payoff")
ENERGY_COLUMNS = ("z", "scheme", "energy_per_block", "bytes_per_block", "verifications_per_block")
COMPLEXITY_COLUMNS = ("z", "messages_per_round", "mean_rounds")

SCHEMAS = {
    "heights": HEIGHT_COLUMNS, "evidence": EVIDENCE_COLUMNS, "reputation": REPUTATION_COLUMNS,
    "pb": PB_COLUMNS, "block_size": BLOCK_COLUMNS, "density": OFFLOAD_COLUMNS, "data_size": OFFLOAD_COLUMNS,
    "psi": PSI_COLUMNS, "z": ENERGY_COLUMNS, "complexity": COMPLEXITY_COLUMNS,
}


def _cell(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(list(v))
    return v


def write_rows(path, columns, rows) -> Path:
    """Write dict rows (or tuples in column order) under a fixed header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            vals = [r[c] for c in columns] if isinstance(r, dict) else list(r)
            if len(vals) != len(columns):
                raise ValueError(f"row has {len(vals)} fields, schema has {len(columns)}")
            w.writerow([_cell(v) for v in vals])
    return path


def read_rows(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    return str(o)


def write_json(path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def export_metrics(metrics, out_dir, fmt: str = "csv") -> list[Path]:
    """Per-height, evidence and reputation tables plus a summary for one consensus run."""
    out = Path(out_dir)
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    heights = [{**asdict(h), "latency": h.latency} for h in metrics.heights]
    tables = {
        "heights": heights,
        "evidence": [dict(zip(EVIDENCE_COLUMNS, e)) for e in metrics.evidence],
        "reputation": [dict(zip(REPUTATION_COLUMNS, r)) for r in metrics.reputation],
    }
    files = []
    if fmt == "csv":
        for name, rows in tables.items():
            files.append(write_rows(out / f"{name}.csv", SCHEMAS[name], rows))
    else:
        doc = {name: [{c: r[c] for c in SCHEMAS[name]} for r in rows] for name, rows in tables.items()}
        files.append(write_json(out / "tables.json", doc))
    files.append(write_json(out / "summary.json", metrics.summary()))
    return files
