"""CSV data files and JSON metadata sidecars.

Every CSV starts with one comment line naming its schema and version, e.g.
``# mmvlimits schema=phase-diagram version=1``, followed by a header row.
Floats are written with ``repr`` so identical runs give identical bytes;
anything run-dependent (timestamps, wall time) goes to the sidecar only.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__

SCHEMA_VERSION = 1
DB_CONVENTION = "x_dB = 10 * log10(x), applied to noise variances and MSEs alike"

COLUMNS = {
    "free-energy": ["rho", "J", "delta_dB", "R", "E", "F"],
    "profile": ["rho", "J", "delta_dB", "R", "E", "F", "kind"],
    "mmse": ["rho", "J", "delta_dB", "R", "mmse", "mmse_dB", "ln_mmse", "region",
             "degenerate", "n_maxima", "bp_mse"],
    "phase-diagram": ["delta_dB", "R", "mmse", "mmse_dB", "ln_mmse", "region", "bp_mse",
                      "degenerate", "n_maxima", "anomalies"],
    "thresholds": ["delta_dB", "kind", "R"],
    "se": ["iteration", "E", "E_dB", "converged"],
    "amp-sweep": ["delta_dB", "R", "setting", "trial", "iterations", "mse", "mse_db",
                  "se_mse", "ratio_ln", "converged", "diverged"],
    "lemma1": ["setting", "estimator", "role", "value", "se", "n_mc"],
    "complex-mmse": ["matrix", "rho", "delta_dB", "R", "mmse", "mmse_dB"],
}


def schema_line(schema: str) -> str:
    return f"# mmvlimits schema={schema} version={SCHEMA_VERSION}"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return str(v)


def write_csv(path, schema: str, rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = COLUMNS[schema]
    with open(path, "w", newline="") as fh:
        fh.write(schema_line(schema) + "\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for row in rows:
            if len(row) != len(cols):
                raise ValueError(f"{schema} row has {len(row)} fields, expected {len(cols)}")
            wr.writerow([_fmt(v) for v in row])
    return path


def read_schema(path) -> str:
    """Schema name from the first line of a CSV written by this package."""
    with open(path) as fh:
        first = fh.readline().strip()
    prefix = "# mmvlimits schema="
    if not first.startswith(prefix):
        raise ValueError(f"{path}: not a mmvlimits CSV (missing schema line)")
    schema = first[len(prefix):].split()[0]
    if schema not in COLUMNS:
        raise ValueError(f"{path}: unknown schema {schema!r}")
    return schema


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def write_sidecar(csv_path, config: dict, schema: str, wall_time: float,
                  extra: dict | None = None) -> Path:
    meta = {
        "tool": "mmvlimits",
        "version": __version__,
        "schema": schema,
        "schema_version": SCHEMA_VERSION,
        "columns": COLUMNS[schema],
        "config": config,
        "db_convention": DB_CONVENTION,
        "python": platform.python_version(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(wall_time, 3),
    }
    if extra:
        meta.update(extra)
    path = sidecar_path(csv_path)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path
