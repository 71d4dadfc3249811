"""Run reports: tab-separated text with a knob echo and timing metadata.

A report is reproducible from (flags, seed): every knob is echoed into
``# knob.`` header lines and all wall-clock-dependent values (generation
time, wall seconds, models per hour, per-row timestamps) are segregated
into ``# timing.`` lines and a trailing ``timestamp`` column so that
``canonical_body`` can strip them when comparing runs byte for byte.
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone

from .plan import PlanResult

TIMING_PREFIX = "# timing."
TIMESTAMP_COLUMN = "timestamp"

PLAN_COLUMNS = ("model_id", "family", "config", "iterations", "val_error",
                "status", "cumulative_scans", TIMESTAMP_COLUMN)


def render_report(command: str, knobs: dict, columns: tuple[str, ...],
                  rows: list[tuple], summary: dict | None = None,
                  timing: dict | None = None) -> str:
    lines = [f"# paqplan {command} report"]
    for key in sorted(knobs):
        lines.append(f"# knob.{key}: {knobs[key]}")
    timing = dict(timing or {})
    timing.setdefault("generated_at", datetime.now(timezone.utc).isoformat())
    for key in sorted(timing):
        lines.append(f"{TIMING_PREFIX}{key}: {timing[key]}")
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(str(v) for v in row))
    if summary:
        cells = ["summary"] + [f"{k}={v}" for k, v in summary.items()]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def plan_report(result: PlanResult, knobs: dict, *, command: str = "plan",
                sim_overhead_seconds: float = 0.0) -> str:
    """One row per history record plus a summary row."""
    stamp = datetime.now(timezone.utc).isoformat()
    rows = []
    cumulative = 0
    finished = 0
    for rec in result.history:
        cumulative += rec.iterations_used
        if rec.status == "finished":
            finished += 1
        family = rec.config.family or "-"
        err = "" if rec.val_error is None else repr(rec.val_error)
        rows.append((rec.model_id, family, rec.config.describe(),
                     rec.iterations_used, err, rec.status, cumulative, stamp))
    wall = result.wall_seconds + sim_overhead_seconds
    summary = {
        "best_model_id": result.best.model_id if result.best else "",
        "best_val_error": repr(result.best.val_error) if result.best else "",
        "best_config": result.best.config.describe() if result.best else "",
        "best_finished": result.best_finished,
        "total_scans": result.scans_used,
        "models_finished": finished,
        "models_seen": len(result.history),
    }
    timing = {
        "wall_seconds": f"{result.wall_seconds:.6f}",
        "sim_overhead_seconds": f"{sim_overhead_seconds:.6f}",
        "models_per_hour": f"{3600.0 * finished / max(wall, 1e-9):.6f}",
    }
    return render_report(command, knobs, PLAN_COLUMNS, rows, summary, timing)


def canonical_body(text: str) -> str:
    """Report text minus timing lines and the timestamp column.

    Two runs with identical flags and seed must agree byte for byte on this
    body.
    """
    out = []
    drop_index: int | None = None
    header_seen = False
    for line in text.splitlines():
        if line.startswith(TIMING_PREFIX):
            continue
        if line.startswith("#"):
            out.append(line)
            continue
        cells = line.split("\t")
        if not header_seen:
            header_seen = True
            if TIMESTAMP_COLUMN in cells:
                drop_index = cells.index(TIMESTAMP_COLUMN)
        if drop_index is not None and len(cells) > drop_index and cells[0] != "summary":
            cells = cells[:drop_index] + cells[drop_index + 1:]
        out.append("\t".join(cells))
    return "\n".join(out) + "\n"


def write_report(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def parse_report(text: str) -> dict:
    """Split a report back into knobs, timing, column rows, and summary."""
    knobs: dict[str, str] = {}
    timing: dict[str, str] = {}
    columns: list[str] = []
    rows: list[dict[str, str]] = []
    summary: dict[str, str] = {}
    for line in text.splitlines():
        if line.startswith("# knob."):
            key, _, value = line[len("# knob."):].partition(": ")
            knobs[key] = value
        elif line.startswith(TIMING_PREFIX):
            key, _, value = line[len(TIMING_PREFIX):].partition(": ")
            timing[key] = value
        elif line.startswith("#"):
            continue
        elif not columns:
            columns = line.split("\t")
        elif line.startswith("summary"):
            for cell in line.split("\t")[1:]:
                key, _, value = cell.partition("=")
                summary[key] = value
        else:
            rows.append(dict(zip(columns, line.split("\t"))))
    return {"knobs": knobs, "timing": timing, "columns": columns,
            "rows": rows, "summary": summary}
