"""Summaries and figures from ``results.jsonl`` files.

Writes ``summary.csv`` (one row per model and prompt mode), ``outcomes.csv``
(one row per model, mode and problem), ``heatmap.svg`` (problem outcome by
model) and ``bars.svg`` (outcome shares per model).
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

OUTCOMES = ("success", "tool_failure", "timeout", "failed")
RANK = {"success": 2, "tool_failure": 1, "timeout": 1, "failed": 0}
COLORS = {
    "success": "#4c9a52",
    "tool_failure": "#e0a23a",
    "timeout": "#8c6bb1",
    "failed": "#c8453c",
    None: "#eeeeee",
}
SUMMARY_FIELDS = ["model", "mode", "problems", *OUTCOMES, "success_rate", "success_pct"]
OUTCOME_FIELDS = ["model", "mode", "benchmark", "best", "failure_tag"]

plt.rcParams.update({
    "svg.hashsalt": "dglcheck",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})


def outcome_kind(label: str) -> str:
    kind = label.split(":", 1)[0]
    if kind not in RANK:
        raise ValueError(f"unknown verdict {label!r}")
    return kind


def read_results(paths) -> list:
    rows = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(json.loads(line))
    return rows


def aggregate(rows) -> dict:
    """``{(model, mode): {benchmark: (best label, failure tag)}}``.

    Duplicate rows for one key keep the best outcome, with ties broken by
    label text so the result does not depend on input order.
    """
    table = defaultdict(dict)
    for r in rows:
        key = (r["model"], r.get("mode", "multi-shot"))
        label = r["best"]
        entry = (label, r.get("failure_tag"))
        cur = table[key].get(r["benchmark"])
        if cur is None or _better(entry, cur):
            table[key][r["benchmark"]] = entry
    return dict(table)


def _better(a, b) -> bool:
    ra, rb = RANK[outcome_kind(a[0])], RANK[outcome_kind(b[0])]
    if ra != rb:
        return ra > rb
    return (a[0], a[1] or "") < (b[0], b[1] or "")


def summarize(table) -> list:
    out = []
    for (model, mode) in sorted(table):
        cells = table[(model, mode)]
        counts = {k: 0 for k in OUTCOMES}
        for label, _ in cells.values():
            counts[outcome_kind(label)] += 1
        n = len(cells)
        rate = Fraction(counts["success"], n) if n else Fraction(0)
        out.append({"model": model, "mode": mode, "problems": n, **counts, "success_rate": rate})
    return out


def write_summary(summary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for row in summary:
            rate = row["success_rate"]
            # exact fraction for machines, rounded percentage for people
            w.writerow({**row, "success_rate": str(rate), "success_pct": f"{float(rate) * 100:.1f}"})


def write_outcomes(table, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=OUTCOME_FIELDS)
        w.writeheader()
        for (model, mode) in sorted(table):
            for bench, (label, tag) in sorted(table[(model, mode)].items()):
                w.writerow({"model": model, "mode": mode, "benchmark": bench,
                            "best": label, "failure_tag": tag or ""})


def _row_label(model, mode):
    return f"{model} ({mode})"


def plot_heatmap(table, path) -> tuple:
    """Grid of best outcomes, rows keyed by (model, mode), columns by problem."""
    keys = sorted(table)
    problems = sorted({b for cells in table.values() for b in cells})
    codes = {k: i for i, k in enumerate((None,) + OUTCOMES)}
    grid = [
        [codes[outcome_kind(table[k][p][0]) if p in table[k] else None] for p in problems]
        for k in keys
    ]
    fig, ax = plt.subplots(figsize=(max(3.0, 0.6 * len(problems) + 2.5),
                                    max(1.6, 0.45 * len(keys) + 1.2)))
    if keys and problems:
        cmap = ListedColormap([COLORS[k] for k in (None,) + OUTCOMES])
        ax.imshow(grid, cmap=cmap, vmin=0, vmax=len(codes) - 1, aspect="auto")
        ax.set_xticks(range(len(problems)), problems, rotation=45, ha="right")
        ax.set_yticks(range(len(keys)), [_row_label(*k) for k in keys])
        ax.set_xticks([x - 0.5 for x in range(1, len(problems))], minor=True)
        ax.set_yticks([y - 0.5 for y in range(1, len(keys))], minor=True)
        ax.grid(which="minor", color="white", linewidth=1.5)
        ax.tick_params(which="minor", length=0)
        handles = [plt.Rectangle((0, 0), 1, 1, color=COLORS[k]) for k in OUTCOMES]
        ax.legend(handles, [k.replace("_", " ") for k in OUTCOMES], loc="upper left",
                  bbox_to_anchor=(1.01, 1.0), frameon=False)
    else:
        ax.text(0.5, 0.5, "no results", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
    ax.set_title("Problem outcome by model")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return len(keys), len(problems)


def plot_bars(summary, path) -> None:
    """Stacked horizontal bars: share of problems in each outcome bucket."""
    fig, ax = plt.subplots(figsize=(6.0, max(1.6, 0.45 * len(summary) + 1.2)))
    if summary:
        labels = [_row_label(r["model"], r["mode"]) for r in summary]
        left = [0.0] * len(summary)
        for kind in OUTCOMES:
            widths = [r[kind] / r["problems"] if r["problems"] else 0.0 for r in summary]
            ax.barh(labels, widths, left=left, color=COLORS[kind], label=kind.replace("_", " "))
            left = [a + b for a, b in zip(left, widths)]
        for y, r in enumerate(summary):
            ax.text(1.01, y, f"{float(r['success_rate']):.0%}", va="center")
        ax.set_xlim(0, 1)
        ax.set_xlabel("fraction of problems")
        ax.invert_yaxis()
        ax.legend(loc="lower center", bbox_to_anchor=(0.5, 1.02), ncol=4, frameon=False)
    else:
        ax.text(0.5, 0.5, "no results", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def make_report(paths, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = aggregate(read_results(paths))
    summary = summarize(table)
    write_summary(summary, out / "summary.csv")
    write_outcomes(table, out / "outcomes.csv")
    shape = plot_heatmap(table, out / "heatmap.svg")
    plot_bars(summary, out / "bars.svg")
    return {"summary": summary, "heatmap_shape": shape, "out": str(out)}
