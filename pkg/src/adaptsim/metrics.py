"""Per-step measurement output: CSV traces and run summaries.

Two layouts (schemas in docs/traces.md):

* merged trace (sim mode): ``steps.csv`` with one row per step covering all
  LPs, plus ``summary.csv``.
* per-LP trace (tcp mode): ``lp<i>_steps.csv`` written by each process;
  ``merge_lp_traces`` combines them into the merged layout.

Interactions are counted at delivery time, at entity-pair granularity
(after the range filter), attributed local/remote by the sending LP versus
the delivering LP. Sent pings are recorded separately.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path


def lcr(local: int, remote: int):
    """Local communication ratio; None when there was no communication."""
    total = local + remote
    if total <= 0:
        return None
    return local / total


def merged_header(num_lps: int):
    head = ["step", "local_interactions", "remote_interactions", "pings_sent",
            "migrations", "wall_nanos", "digest"]
    head += [f"se_count_lp{i}" for i in range(num_lps)]
    head += [f"busy_nanos_lp{i}" for i in range(num_lps)]
    return head


def write_merged_trace(trace_dir, result, config_echo: dict) -> None:
    """Write steps.csv + summary.csv for a completed in-process run."""
    path = Path(trace_dir)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "steps.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(merged_header(result.num_lps))
        for row in result.rows:
            writer.writerow(
                [row.step, row.local, row.remote, row.pings_sent,
                 row.migrations, row.wall_nanos, f"{row.digest:016x}"]
                + row.se_counts + row.busy_nanos)
    write_summary(path / "summary.csv", result, config_echo)


def write_summary_row(summary_path, row: dict) -> None:
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(row.keys()))
        writer.writerow(list(row.values()))


def write_summary(summary_path, result, config_echo: dict) -> None:
    avg = result.avg_lcr
    final = result.final_lcr
    row = dict(config_echo)
    row.update({
        "kernel_backend": result.backend,
        "total_wct_s": result.total_wct_ns / 1e9,
        "avg_lcr": "" if avg is None else f"{avg:.6f}",
        "final_lcr": "" if final is None else f"{final:.6f}",
        "total_interactions": result.total_interactions,
        "total_migrations": result.total_migrations,
    })
    write_summary_row(summary_path, row)


PER_LP_HEADER = ["step", "local_interactions", "remote_interactions", "pings_sent",
                 "migrations_out", "se_count", "busy_nanos", "wall_nanos",
                 "digest_partial"]


class PerLpTraceWriter:
    """Streams one LP's per-step rows (tcp mode)."""

    def __init__(self, trace_dir, lp: int):
        path = Path(trace_dir)
        path.mkdir(parents=True, exist_ok=True)
        self.path = path / f"lp{lp}_steps.csv"
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(PER_LP_HEADER)

    def write(self, step, local, remote, pings_sent, migrations_out,
              se_count, busy_nanos, wall_nanos, digest_partial) -> None:
        self._writer.writerow([step, local, remote, pings_sent, migrations_out,
                               se_count, busy_nanos, wall_nanos,
                               f"{digest_partial:016x}"])

    def close(self) -> None:
        self._fh.close()


def read_merged_trace(trace_dir):
    """Load steps.csv rows as dicts with numeric fields parsed."""
    path = Path(trace_dir) / "steps.csv"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if key == "digest":
                    row[key] = int(val, 16)
                else:
                    row[key] = int(val)
            rows.append(row)
    return rows


def read_summary(trace_dir):
    path = Path(trace_dir) / "summary.csv"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            return row
    raise ValueError(f"{path}: empty summary")


def merge_lp_traces(trace_dir, num_lps: int):
    """Combine per-LP traces into merged rows (XORing digest partials).

    Returns rows in the merged-trace dict layout. Raises if the per-LP
    files disagree on step count.
    """
    per_lp = []
    for lp in range(num_lps):
        path = Path(trace_dir) / f"lp{lp}_steps.csv"
        with open(path, newline="") as fh:
            per_lp.append(list(csv.DictReader(fh)))
    steps = {len(rows) for rows in per_lp}
    if len(steps) != 1:
        raise ValueError(f"per-LP traces in {trace_dir} have differing step counts")
    merged = []
    for i in range(steps.pop()):
        digest = 0
        row = {"step": int(per_lp[0][i]["step"]), "local_interactions": 0,
               "remote_interactions": 0, "pings_sent": 0, "migrations": 0,
               "wall_nanos": 0}
        for lp in range(num_lps):
            rec = per_lp[lp][i]
            if int(rec["step"]) != row["step"]:
                raise ValueError(f"step mismatch in {trace_dir} at row {i}")
            row["local_interactions"] += int(rec["local_interactions"])
            row["remote_interactions"] += int(rec["remote_interactions"])
            row["pings_sent"] += int(rec["pings_sent"])
            row["migrations"] += int(rec["migrations_out"])
            row["wall_nanos"] = max(row["wall_nanos"], int(rec["wall_nanos"]))
            row[f"se_count_lp{lp}"] = int(rec["se_count"])
            row[f"busy_nanos_lp{lp}"] = int(rec["busy_nanos"])
            digest ^= int(rec["digest_partial"], 16)
        row["digest"] = digest
        merged.append(row)
    return merged


def write_rows_as_merged(trace_dir, rows, num_lps: int) -> None:
    """Persist merge_lp_traces output in the merged steps.csv layout."""
    path = Path(trace_dir)
    with open(path / "steps.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = merged_header(num_lps)
        writer.writerow(header)
        for row in rows:
            out = [row["step"], row["local_interactions"], row["remote_interactions"],
                   row["pings_sent"], row["migrations"], row["wall_nanos"],
                   f"{row['digest']:016x}"]
            out += [row[f"se_count_lp{i}"] for i in range(num_lps)]
            out += [row[f"busy_nanos_lp{i}"] for i in range(num_lps)]
            writer.writerow(out)
