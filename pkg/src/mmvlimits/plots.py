"""Emit standalone matplotlib scripts that render CSVs written by the CLI.

Nothing is plotted here; the generated script is meant to be run elsewhere
with ``python script.py`` and only needs numpy and matplotlib.
"""

from __future__ import annotations

from pathlib import Path

from .output import read_schema

_HEAD = '''"""Plot {csv_name} ({schema}). Generated by mmvlimits."""
import csv
import sys

import matplotlib.pyplot as plt
import numpy as np

CSV = {csv_path!r}


def load(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    return rows


rows = load(CSV)
'''

_HEATMAP = '''
key = {value_key!r}
delta = sorted({{float(r["delta_dB"]) for r in rows}})
rate = sorted({{float(r["R"]) for r in rows}})
grid = np.full((len(rate), len(delta)), np.nan)
{aggregate}
fig, ax = plt.subplots(figsize=(6, 4.5))
mesh = ax.pcolormesh(delta, rate, grid, shading="nearest", cmap={cmap!r})
fig.colorbar(mesh, ax=ax, label={cbar!r})
{overlay}
ax.set_xlabel("noise variance $\\\\Delta$ (dB)")
ax.set_ylabel("measurement rate $R$")
ax.set_title({title!r})
fig.tight_layout()
fig.savefig(CSV.rsplit(".", 1)[0] + ".png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''

_CELL_VALUE = '''for r in rows:
    i, j = rate.index(float(r["R"])), delta.index(float(r["delta_dB"]))
    grid[i, j] = float(r[key])
'''

_CELL_MEDIAN = '''cells = {}
for r in rows:
    cells.setdefault((float(r["R"]), float(r["delta_dB"])), []).append(r)
for (R, d), rs in cells.items():
    mse = np.median([float(x["mse"]) for x in rs])
    grid[rate.index(R), delta.index(d)] = np.log(mse / float(rs[0]["se_mse"]))
'''

_REGION_OVERLAY = '''regions = np.full_like(grid, np.nan)
for r in rows:
    regions[rate.index(float(r["R"])), delta.index(float(r["delta_dB"]))] = float(r["region"])
ax.contour(delta, rate, regions, levels=[1.5, 2.5, 3.5], colors="w", linewidths=1.0)
'''

_LINES = '''
fig, ax = plt.subplots(figsize=(6, 4.5))
groups = {{}}
for r in rows:
    groups.setdefault(r[{group!r}], []).append(r)
for label, rs in groups.items():
    {body}
ax.set_xscale({xscale!r})
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
ax.legend(title={group!r})
fig.tight_layout()
fig.savefig(CSV.rsplit(".", 1)[0] + ".png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''

_PROFILE_BODY = '''grid_rows = [x for x in rs if x["kind"] == "grid"]
    ax.plot([float(x["E"]) for x in grid_rows], [float(x["F"]) for x in grid_rows], label=label)
    for x in rs:
        if x["kind"] in ("max", "global"):
            ax.plot(float(x["E"]), float(x["F"]), "ko", mfc="k" if x["kind"] == "global" else "none")'''

_FREE_ENERGY_BODY = '''ax.plot([float(x["E"]) for x in rs], [float(x["F"]) for x in rs], label=label)'''

_SE_BODY = '''ax.plot([int(x["iteration"]) for x in rs], [float(x["E_dB"]) for x in rs], ".-", label=label)'''

KIND_FOR_SCHEMA = {
    "phase-diagram": "heatmap",
    "amp-sweep": "ratio-heatmap",
    "profile": "profile",
    "free-energy": "free-energy",
    "se": "trace",
}


def render_plot_script(csv_path, kind: str | None = None) -> str:
    """Source text of a plotting script for ``csv_path``."""
    schema = read_schema(csv_path)
    if schema not in KIND_FOR_SCHEMA:
        raise ValueError(f"no plot is defined for schema {schema!r}")
    expected = KIND_FOR_SCHEMA[schema]
    if kind is not None and kind != expected:
        raise ValueError(f"kind {kind!r} does not fit schema {schema!r} (expected {expected!r})")
    text = _HEAD.format(csv_name=Path(csv_path).name, schema=schema, csv_path=str(csv_path))
    if expected == "heatmap":
        text += _HEATMAP.format(value_key="ln_mmse", aggregate=_CELL_VALUE, cmap="gray",
                                cbar="ln(MMSE)", overlay=_REGION_OVERLAY,
                                title="ln(MMSE) with region boundaries")
    elif expected == "ratio-heatmap":
        text += _HEATMAP.format(value_key="mse", aggregate=_CELL_MEDIAN, cmap="gray",
                                cbar="ln(MSE_AMP / MSE_BP)", overlay="",
                                title="AMP median MSE relative to SE prediction")
    elif expected == "profile":
        text += _LINES.format(group="R", body=_PROFILE_BODY, xscale="log",
                              xlabel="MSE E", ylabel="free energy F(E)")
    elif expected == "free-energy":
        text += _LINES.format(group="R", body=_FREE_ENERGY_BODY, xscale="log",
                              xlabel="MSE E", ylabel="free energy F(E)")
    else:
        text += _LINES.format(group="converged", body=_SE_BODY, xscale="linear",
                              xlabel="iteration", ylabel="predicted MSE (dB)")
    return text


def emit_plot_script(csv_path, kind: str | None = None, script_path=None) -> Path:
    """Write the plotting script next to the CSV (``<stem>.plot.py`` by default)."""
    csv_path = Path(csv_path)
    script_path = Path(script_path) if script_path else csv_path.with_name(csv_path.stem + ".plot.py")
    script_path.write_text(render_plot_script(csv_path, kind))
    return script_path
