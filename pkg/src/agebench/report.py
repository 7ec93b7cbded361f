"""Tidy CSV output, its round-trip reader, and figure rendering.

One row schema serves every table:

    source,metric,threshold,value,method,ci_halfwidth

``source`` 0 denotes the max over sources (allocation sweeps); for rate
sweeps the ``threshold`` column carries the swept rate. Files are UTF-8
with LF line endings. Figures are rendered headless to PNG next to the CSV.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CSV_COLUMNS = ("source", "metric", "threshold", "value", "method", "ci_halfwidth")


def write_rows(path, rows) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            ci = row.get("ci_halfwidth")
            writer.writerow([
                row["source"], row["metric"], repr(float(row["threshold"])),
                repr(float(row["value"])), row["method"],
                "" if ci is None else repr(float(ci)),
            ])


def read_rows(path):
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path} does not carry the expected columns {CSV_COLUMNS}")
        for rec in reader:
            out.append({
                "source": int(rec["source"]),
                "metric": rec["metric"],
                "threshold": float(rec["threshold"]),
                "value": float(rec["value"]),
                "method": rec["method"],
                "ci_halfwidth": float(rec["ci_halfwidth"]) if rec["ci_halfwidth"] else None,
            })
    return out


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# figures


def _finish(fig, ax, path, xlabel, ylabel, title):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def violation_curves_figure(rows_by_kind, metric, path, title):
    """Violation probability vs threshold, one line per (service kind, source)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind, rows in rows_by_kind.items():
        sources = sorted({r["source"] for r in rows})
        for src in sources:
            pts = sorted((r["threshold"], r["value"]) for r in rows
                         if r["source"] == src and r["metric"] == metric
                         and r["method"] == "general")
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts],
                        marker=".", label=f"{kind}, source {src}")
    _finish(fig, ax, path, "threshold", f"P({metric} > threshold)", title)


def simulate_figure(rows, path, title):
    """Analytic-vs-empirical bars at the configured thresholds."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels, sim_vals, sim_err, ana_vals = [], [], [], []
    for metric in ("AoI", "PAoI"):
        for src in sorted({r["source"] for r in rows}):
            sim = [r for r in rows if r["source"] == src and r["metric"] == metric
                   and r["method"] == "sim"]
            ana = [r for r in rows if r["source"] == src and r["metric"] == metric
                   and r["method"] in ("closed", "general")]
            if not sim or not ana:
                continue
            labels.append(f"{metric}\nsrc {src}")
            sim_vals.append(sim[0]["value"])
            sim_err.append(sim[0]["ci_halfwidth"] or 0.0)
            ana_vals.append(sorted(ana, key=lambda r: r["method"])[0]["value"])
    x = range(len(labels))
    ax.bar([i - 0.18 for i in x], sim_vals, width=0.36, yerr=sim_err,
           capsize=3, label="simulated")
    ax.bar([i + 0.18 for i in x], ana_vals, width=0.36, label="analytic")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    _finish(fig, ax, path, "", "violation probability", title)


def sweep_rate_figure(grid, values, optimum, path, title):
    """Max violation along one source's rate with the optimum marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(grid, values, label="max violation probability")
    ax.plot([optimum[0]], [optimum[1]], "x", markersize=10, color="tab:red",
            label=f"optimum ({optimum[0]:.4f}, {optimum[1]:.4g})")
    _finish(fig, ax, path, "rate of the swept source", "max violation probability", title)


def sweep_total_figure(grid, optimal, equal, path, title):
    """Optimal vs equal-allocation objective as the rate budget grows."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(grid, optimal, marker="x", label="optimal allocation")
    ax.semilogy(grid, equal, marker="s", markerfacecolor="none", label="equal allocation")
    _finish(fig, ax, path, "total arrival rate", "max violation probability", title)
