"""Plot data export (CSV) and rendered figures (PNG).

Every figure is backed by a CSV written next to it, so the charts can be
redrawn with any tool.  Figures are built on :class:`matplotlib.figure.Figure`
directly, without pyplot's global state.
"""

import csv
import math
import os

import numpy as np

from .metrics import METRIC_KINDS

LABELS = {
    "trace_distance": "Trace distance",
    "fidelity": "Fidelity",
    "bures_distance": "Bures distance",
    "quantum_relative_entropy": "Quantum relative entropy",
}
COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _result_row(name, res):
    metrics = res.metrics or {}
    closeness = res.closeness or {}
    return (
        [name, res.n_correct, res.n_misclassified, _fmt(res.class_accuracy), res.degenerate or ""]
        + [_fmt(metrics[k].value) if k in metrics else "" for k in METRIC_KINDS]
        + [_fmt(res.normalized[k]) if res.normalized else "" for k in METRIC_KINDS]
        + [_fmt(closeness.get(k)) for k in METRIC_KINDS]
        + [int(res.flags[k]) for k in METRIC_KINDS]
    )


_HEADER_TAIL = (
    list(METRIC_KINDS)
    + [f"{k}_normalized" for k in METRIC_KINDS]
    + [f"{k}_closeness" for k in METRIC_KINDS]
    + [f"{k}_flag" for k in METRIC_KINDS]
)


def _figure(width=7.0, height=4.0):
    from matplotlib.figure import Figure

    return Figure(figsize=(width, height), dpi=100)


def _grouped_bars(path, groups, values, ylabel, title, threshold=None):
    """Bars grouped by ``groups``; ``values[kind]`` is a list aligned with groups."""
    fig = _figure()
    ax = fig.add_subplot(111)
    x = np.arange(len(groups))
    width = 0.8 / len(METRIC_KINDS)
    for i, kind in enumerate(METRIC_KINDS):
        ys = [np.nan if v is None or not math.isfinite(v) else v for v in values[kind]]
        ax.bar(x + (i - 1.5) * width, ys, width, label=LABELS[kind], color=COLORS[i])
    if threshold is not None:
        ax.axhline(threshold, color="k", linestyle="--", linewidth=1, label="threshold")
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path)


def _heatmap(path, groups, values, title):
    grid = np.array([[np.nan if v is None else v for v in values[k]] for k in METRIC_KINDS])
    fig = _figure(1.5 + 0.9 * len(groups), 3.5)
    ax = fig.add_subplot(111)
    im = ax.imshow(grid, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(groups)
    ax.set_yticks(range(len(METRIC_KINDS)))
    ax.set_yticklabels([LABELS[k] for k in METRIC_KINDS])
    for (i, j), v in np.ndenumerate(grid):
        if np.isfinite(v):
            ax.text(j, i, f"{v:.3f}", ha="center", va="center", color="w", fontsize=8)
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)


def _collect(results, field):
    out = {k: [] for k in METRIC_KINDS}
    for res in results:
        for k in METRIC_KINDS:
            if field == "metrics":
                m = (res.metrics or {}).get(k)
                out[k].append(None if m is None else m.value)
            else:
                out[k].append((getattr(res, field) or {}).get(k))
    return out


def export_report(report, out_dir, figures=True):
    """Per-class plot data (and charts) for one report; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, _safe(report.dataset_id))
    results = list(report.per_class) + [report.overall]
    names = [str(r.class_label) for r in report.per_class] + ["all"]
    table = stem + "_classes.csv"
    _write_csv(table, ["class", "n_correct", "n_misclassified", "class_accuracy", "degenerate"]
               + _HEADER_TAIL, [_result_row(n, r) for n, r in zip(names, results)])
    written = [table]
    if figures:
        thresholds = report.config_echo.get("thresholds", {})
        threshold = thresholds.get("trace_distance")
        paths = {
            "values": stem + "_class_metrics.png",
            "normalized": stem + "_class_normalized.png",
            "closeness": stem + "_class_closeness.png",
            "heatmap": stem + "_closeness_heatmap.png",
        }
        _grouped_bars(paths["values"], names, _collect(results, "metrics"), "metric value",
                      f"Metric values per class ({report.dataset_id})")
        _grouped_bars(paths["normalized"], names, _collect(results, "normalized"),
                      "normalized dissimilarity", f"Normalized metrics vs threshold ({report.dataset_id})",
                      threshold=threshold)
        _grouped_bars(paths["closeness"], names, _collect(results, "closeness"),
                      "|metric - accuracy|", f"Metric closeness to accuracy ({report.dataset_id})")
        _heatmap(paths["heatmap"], names, _collect(results, "closeness"),
                 f"Closeness to accuracy per class ({report.dataset_id})")
        written.extend(paths.values())
    return written


def export_reports(reports, out_dir, correlations=None, figures=True):
    """Dataset-level plot data across several reports."""
    os.makedirs(out_dir, exist_ok=True)
    names = [r.dataset_id for r in reports]
    overall = [r.overall for r in reports]
    table = os.path.join(out_dir, "datasets.csv")
    rows = []
    for rep in reports:
        row = _result_row(rep.dataset_id, rep.overall)
        row[3] = _fmt(rep.model_accuracy)
        rows.append(row)
    _write_csv(table, ["dataset", "n_correct", "n_misclassified", "accuracy", "degenerate"]
               + _HEADER_TAIL, rows)
    written = [table]
    if correlations:
        corr = os.path.join(out_dir, "correlations.csv")
        _write_csv(corr, ["metric", "r", "n", "excluded"],
                   [[k, _fmt(v["r"]), v["n"], v["excluded"]] for k, v in correlations.items()])
        written.append(corr)
    if figures:
        paths = {
            "values": os.path.join(out_dir, "datasets_metrics.png"),
            "closeness": os.path.join(out_dir, "datasets_closeness.png"),
            "heatmap": os.path.join(out_dir, "datasets_heatmap.png"),
        }
        values = _collect(overall, "metrics")
        _grouped_bars(paths["values"], names, values, "metric value",
                      "Metric values across datasets")
        _grouped_bars(paths["closeness"], names, _collect(overall, "closeness"),
                      "|metric - accuracy|", "Metric closeness to accuracy across datasets")
        _heatmap(paths["heatmap"], names, values, "Metric values across datasets")
        written.extend(paths.values())
    return written


def _safe(name):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in str(name)) or "report"
