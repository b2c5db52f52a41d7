"""Static chart + table generation from run traces.

Reads one or more trace directories (merged ``steps.csv`` or per-LP
``lp<i>_steps.csv`` sets) and renders:

* ``messages.svg``    total interactions vs. model size, per mode
* ``wct.svg``         wall-clock time per mode, grouped by model size
* ``lcr.svg``         per-step LCR with running average
* ``allocation.svg``  per-LP entity counts over time
* ``report.txt``      WCT comparison table with gain percentages vs static
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import metrics

log = logging.getLogger(__name__)

_MODE_COLORS = {"static": "black", "gaia": "tab:red", "gaia_plus": "tab:blue"}


class ReportError(Exception):
    pass


def load_run(trace_dir):
    """Load one run: returns {dir, summary, rows, num_lps}."""
    path = Path(trace_dir)
    if (path / "steps.csv").is_file():
        rows = metrics.read_merged_trace(path)
        summary = metrics.read_summary(path) if (path / "summary.csv").is_file() else {}
        num_lps = _count_lps(rows)
    else:
        lp_files = sorted(path.glob("lp*_steps.csv"))
        if not lp_files:
            raise ReportError(f"{path}: no steps.csv or lp*_steps.csv found")
        num_lps = len(lp_files)
        rows = metrics.merge_lp_traces(path, num_lps)
        summary = {}
        lp0 = path / "lp0_summary.csv"
        if lp0.is_file():
            import csv
            with open(lp0, newline="") as fh:
                summary = next(iter(csv.DictReader(fh)), {})
        if rows and "total_wct_s" not in summary:
            summary["total_wct_s"] = str(sum(r["wall_nanos"] for r in rows) / 1e9)
    if not rows:
        raise ReportError(f"{path}: empty trace")
    return {"dir": str(path), "summary": summary, "rows": rows, "num_lps": num_lps}


def _count_lps(rows):
    n = 0
    while f"se_count_lp{n}" in rows[0]:
        n += 1
    return n


def _mode(run):
    return run["summary"].get("mode", "unknown")


def _num_mh(run):
    try:
        return int(run["summary"].get("num_mh", 0))
    except ValueError:
        return 0


def _wct_s(run):
    try:
        return float(run["summary"]["total_wct_s"])
    except (KeyError, ValueError):
        return sum(r["wall_nanos"] for r in run["rows"]) / 1e9


def lcr_points(rows):
    xs, ys = [], []
    for r in rows:
        tot = r["local_interactions"] + r["remote_interactions"]
        if tot > 0:
            xs.append(r["step"])
            ys.append(r["local_interactions"] / tot)
    return xs, ys


def running_average(ys):
    out = []
    acc = 0.0
    for i, v in enumerate(ys):
        acc += v
        out.append(acc / (i + 1))
    return out


def render_report(trace_dirs, out_dir) -> tuple[list, list]:
    """Render all charts and the comparison table.

    Returns (loaded runs, per-directory warnings). Raises ReportError only
    if nothing could be loaded.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    warnings = []
    for d in trace_dirs:
        try:
            runs.append(load_run(d))
        except (OSError, ValueError, ReportError) as exc:
            warnings.append(f"{d}: {exc}")
    if not runs:
        raise ReportError("no usable traces: " + "; ".join(warnings))

    _chart_messages(runs, out / "messages.svg")
    _chart_wct(runs, out / "wct.svg")
    _chart_lcr(runs, out / "lcr.svg")
    _chart_allocation(runs, out / "allocation.svg")
    table = gain_table(runs)
    (out / "report.txt").write_text(table, encoding="utf-8")
    return runs, warnings


def gain_table(runs) -> str:
    """WCT per (model size, mode) and gain relative to the static run."""
    by_n = {}
    for run in runs:
        by_n.setdefault(_num_mh(run), {})[_mode(run)] = _wct_s(run)
    lines = [f"{'num_mh':>8}  {'mode':<10} {'wct_s':>12}  {'gain_vs_static':>14}"]
    for n in sorted(by_n):
        static = by_n[n].get("static")
        for mode in sorted(by_n[n]):
            wct = by_n[n][mode]
            if static and static > 0:
                gain = (static - wct) / static * 100.0
                gain_s = f"{gain:13.2f}%"
            else:
                gain_s = "           n/a"
            lines.append(f"{n:>8}  {mode:<10} {wct:>12.3f}  {gain_s}")
    return "\n".join(lines) + "\n"


def _chart_messages(runs, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    by_mode = {}
    for run in runs:
        total = sum(r["local_interactions"] + r["remote_interactions"]
                    for r in run["rows"])
        by_mode.setdefault(_mode(run), []).append((_num_mh(run), total))
    for mode, pts in sorted(by_mode.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=mode, color=_MODE_COLORS.get(mode))
    ax.set_xlabel("mobile hosts")
    ax.set_ylabel("delivered interactions per run")
    ax.set_title("Model traffic vs. model size")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _chart_wct(runs, path):
    by_n = {}
    for run in runs:
        by_n.setdefault(_num_mh(run), {})[_mode(run)] = _wct_s(run)
    ns = sorted(by_n)
    modes = sorted({m for d in by_n.values() for m in d})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / max(1, len(modes))
    for i, mode in enumerate(modes):
        xs = [j + i * width for j in range(len(ns))]
        ys = [by_n[n].get(mode, 0.0) for n in ns]
        ax.bar(xs, ys, width=width, label=mode, color=_MODE_COLORS.get(mode))
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(ns))])
    ax.set_xticklabels([str(n) for n in ns])
    ax.set_xlabel("mobile hosts")
    ax.set_ylabel("wall-clock time (s)")
    ax.set_title("Run time per mode (lower is better)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _chart_lcr(runs, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for run in runs:
        xs, ys = lcr_points(run["rows"])
        if not xs:
            continue
        mode = _mode(run)
        color = _MODE_COLORS.get(mode)
        ax.plot(xs, ys, label=f"{mode} (n={_num_mh(run)})", color=color, alpha=0.7)
        ax.plot(xs, running_average(ys), linestyle="--", color=color, alpha=0.9)
    ax.set_xlabel("timestep")
    ax.set_ylabel("local communication ratio")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("LCR per timestep (dashed: running average)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _chart_allocation(runs, path):
    pick = None
    for run in runs:
        if _mode(run) == "gaia_plus":
            pick = run
            break
    if pick is None:
        pick = runs[0]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    rows = pick["rows"]
    for lp in range(pick["num_lps"]):
        ax.plot([r["step"] for r in rows],
                [r[f"se_count_lp{lp}"] for r in rows], label=f"LP {lp}")
    ax.set_xlabel("timestep")
    ax.set_ylabel("entities hosted")
    ax.set_title(f"Entity allocation over time ({_mode(pick)})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
