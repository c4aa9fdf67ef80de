"""Report rendering: delimited tables, markdown tables, and the figures
saved alongside them.

Markdown column order mirrors the aggregate score table layout: WMD, S-BERT,
ROUGE-L, METEOR, FID, CLIP, Cap-S, Text-S, ALL-S, then average step length.
The WMD column carries the similarity orientation; the raw distance is kept
in the delimited output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

#: Markdown column order (metric key, column header).
TABLE_COLUMNS = [
    ("wmd_similarity", "WMD"),
    ("sbert", "S-BERT"),
    ("rouge_l", "ROUGE-L"),
    ("meteor", "METEOR"),
    ("fid", "FID"),
    ("clip", "CLIP"),
    ("cap_s", "Cap-S"),
    ("text_s", "Text-S"),
    ("all_s", "ALL-S"),
]

CSV_METRICS = [
    "wmd_similarity",
    "wmd_distance",
    "sbert",
    "rouge_l",
    "meteor",
    "fid",
    "clip",
    "cap_s",
    "text_s",
    "all_s",
]


@dataclass
class MethodRow:
    method: str
    n_plans: int
    avg_steps: float | None
    means: dict[str, float | None]
    excluded: dict[str, int] = field(default_factory=dict)


@dataclass
class ComparisonReport:
    per_dataset: dict[str, list[MethodRow]]
    fingerprint: str = ""
    failures: list[str] = field(default_factory=list)


def _fmt(value: float | None, decimals: int = 2) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


def _excluded_note(excluded: Mapping[str, int]) -> str:
    parts = [f"{k}:{v}" for k, v in sorted(excluded.items()) if v]
    return ";".join(parts)


def write_scores_csv(report: ComparisonReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["dataset", "method", "n_plans", "avg_steps", *CSV_METRICS, "excluded"]
        )
        for dataset in sorted(report.per_dataset):
            for row in report.per_dataset[dataset]:
                writer.writerow(
                    [
                        dataset,
                        row.method,
                        row.n_plans,
                        _fmt(row.avg_steps),
                        *[_fmt(row.means.get(metric), 4) for metric in CSV_METRICS],
                        _excluded_note(row.excluded),
                    ]
                )
    return path


def write_scores_markdown(report: ComparisonReport, path: str | Path) -> Path:
    path = Path(path)
    lines: list[str] = []
    for dataset in sorted(report.per_dataset):
        lines.append(f"## {dataset}")
        lines.append("")
        headers = ["Method", *[h for _, h in TABLE_COLUMNS], "Steps Avg."]
        lines.append("| " + " | ".join(headers) + " |")
        lines.append("|" + "|".join(["---"] * len(headers)) + "|")
        for row in report.per_dataset[dataset]:
            cells = [row.method]
            cells += [_fmt(row.means.get(metric)) for metric, _ in TABLE_COLUMNS]
            cells.append(_fmt(row.avg_steps))
            lines.append("| " + " | ".join(cells) + " |")
        excluded = {
            row.method: _excluded_note(row.excluded)
            for row in report.per_dataset[dataset]
            if _excluded_note(row.excluded)
        }
        if excluded:
            lines.append("")
            for method, note in sorted(excluded.items()):
                lines.append(f"- excluded plans for {method}: {note}")
        lines.append("")
    if report.fingerprint:
        lines.append(f"Backends: `{report.fingerprint}`")
    if report.failures:
        lines.append(f"Failed tasks: {len(report.failures)}")
    lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


_BAR_METRICS = [
    ("wmd_similarity", "WMD"),
    ("sbert", "S-BERT"),
    ("rouge_l", "ROUGE-L"),
    ("meteor", "METEOR"),
    ("cap_s", "Cap-S"),
    ("text_s", "Text-S"),
    ("all_s", "ALL-S"),
]


def render_scores_figure(report: ComparisonReport, path: str | Path) -> Path:
    """Grouped bars of the similarity-oriented metrics per method, one panel
    per dataset, plus a CLIP/FID panel."""
    path = Path(path)
    datasets = sorted(report.per_dataset)
    fig, axes = plt.subplots(
        len(datasets), 2, figsize=(13, 4 * len(datasets)), squeeze=False
    )
    for row_idx, dataset in enumerate(datasets):
        rows = report.per_dataset[dataset]
        ax = axes[row_idx][0]
        width = 0.8 / max(1, len(rows))
        for pos, method_row in enumerate(rows):
            values = [method_row.means.get(m) or 0.0 for m, _ in _BAR_METRICS]
            offsets = [i + pos * width for i in range(len(_BAR_METRICS))]
            ax.bar(offsets, values, width=width, label=method_row.method)
        ax.set_xticks([i + 0.4 for i in range(len(_BAR_METRICS))])
        ax.set_xticklabels([label for _, label in _BAR_METRICS], rotation=30)
        ax.set_title(f"{dataset}: text/multimodal scores")
        ax.set_ylim(bottom=0)
        ax.legend(fontsize=7)

        ax2 = axes[row_idx][1]
        methods = [r.method for r in rows]
        clip_values = [r.means.get("clip") or 0.0 for r in rows]
        fid_values = [r.means.get("fid") or 0.0 for r in rows]
        xs = range(len(methods))
        ax2.bar([x - 0.2 for x in xs], clip_values, width=0.4, label="CLIP")
        ax2.bar([x + 0.2 for x in xs], fid_values, width=0.4, label="FID")
        ax2.set_xticks(list(xs))
        ax2.set_xticklabels(methods, rotation=30, fontsize=7)
        ax2.set_title(f"{dataset}: image scores")
        ax2.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def format_delta(value: float | None, base: float | None) -> str:
    """Table cell "value (+/-pct%)" against the unablated base value."""
    if value is None:
        return "-"
    if base is None or base == 0:
        return f"{value:.3f}"
    pct = (value - base) / abs(base) * 100.0
    return f"{value:.3f} ({pct:+.1f}%)"


@dataclass
class AblationReport:
    base_method: str
    per_dataset: dict[str, list[MethodRow]]
    fingerprint: str = ""

    def delta_cell(self, dataset: str, method: str, metric: str) -> str:
        rows = {r.method: r for r in self.per_dataset[dataset]}
        base = rows[self.base_method].means.get(metric)
        value = rows[method].means.get(metric)
        if method == self.base_method:
            return _fmt(value, 3)
        return format_delta(value, base)


def write_ablation_markdown(report: AblationReport, path: str | Path) -> Path:
    path = Path(path)
    lines: list[str] = []
    metrics = [(m, h) for m, h in TABLE_COLUMNS]
    for dataset in sorted(report.per_dataset):
        lines.append(f"## {dataset}: bridge ablations (vs {report.base_method})")
        lines.append("")
        headers = ["Method", *[h for _, h in metrics]]
        lines.append("| " + " | ".join(headers) + " |")
        lines.append("|" + "|".join(["---"] * len(headers)) + "|")
        for row in report.per_dataset[dataset]:
            cells = [row.method]
            cells += [report.delta_cell(dataset, row.method, m) for m, _ in metrics]
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    if report.fingerprint:
        lines.append(f"Backends: `{report.fingerprint}`")
    lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def write_ablation_csv(report: AblationReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "metric", "value", "delta_vs_base"])
        for dataset in sorted(report.per_dataset):
            base_row = next(
                r for r in report.per_dataset[dataset] if r.method == report.base_method
            )
            for row in report.per_dataset[dataset]:
                for metric in CSV_METRICS:
                    value = row.means.get(metric)
                    base = base_row.means.get(metric)
                    delta = (
                        ""
                        if value is None or base in (None, 0) or row.method == report.base_method
                        else f"{(value - base) / abs(base) * 100.0:+.1f}%"
                    )
                    writer.writerow(
                        [dataset, row.method, metric, _fmt(value, 4), delta]
                    )
    return path


def render_ablation_figure(report: AblationReport, path: str | Path) -> Path:
    path = Path(path)
    datasets = sorted(report.per_dataset)
    fig, axes = plt.subplots(1, len(datasets), figsize=(6 * len(datasets), 4), squeeze=False)
    metrics = [m for m, _ in _BAR_METRICS]
    for idx, dataset in enumerate(datasets):
        ax = axes[0][idx]
        rows = {r.method: r for r in report.per_dataset[dataset]}
        base = rows[report.base_method].means
        others = [m for m in rows if m != report.base_method]
        width = 0.8 / max(1, len(others))
        for pos, method in enumerate(others):
            deltas = []
            for metric in metrics:
                value = rows[method].means.get(metric)
                base_value = base.get(metric)
                if value is None or not base_value:
                    deltas.append(0.0)
                else:
                    deltas.append((value - base_value) / abs(base_value) * 100.0)
            offsets = [i + pos * width for i in range(len(metrics))]
            ax.bar(offsets, deltas, width=width, label=method)
        ax.axhline(0.0, color="black", linewidth=0.7)
        ax.set_xticks([i + 0.4 for i in range(len(metrics))])
        ax.set_xticklabels([h for _, h in _BAR_METRICS], rotation=30)
        ax.set_ylabel(f"% change vs {report.base_method}")
        ax.set_title(dataset)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


@dataclass
class RobustnessRow:
    template_id: str
    role: str
    body: str
    misleading: bool
    alignment: dict[str, float]
    average: float
    selected: bool = False
    reference: dict[str, float] | None = None


@dataclass
class RobustnessReport:
    rows: list[RobustnessRow]
    selected: dict[str, str]


def _reference_note(row: RobustnessRow) -> str:
    if not row.reference:
        return ""
    parts = [f"{d}={v:.4f}" for d, v in sorted(row.reference.items())]
    return " ".join(parts)


def write_robustness_csv(report: RobustnessReport, path: str | Path) -> Path:
    path = Path(path)
    datasets = sorted({d for row in report.rows for d in row.alignment})
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["role", "template_id", "misleading", *datasets, "average", "selected",
             "reference"]
        )
        for row in report.rows:
            writer.writerow(
                [
                    row.role,
                    row.template_id,
                    int(row.misleading),
                    *[_fmt(row.alignment.get(d), 4) for d in datasets],
                    _fmt(row.average, 4),
                    int(row.selected),
                    _reference_note(row),
                ]
            )
    return path


def write_robustness_markdown(report: RobustnessReport, path: str | Path) -> Path:
    path = Path(path)
    datasets = sorted({d for row in report.rows for d in row.alignment})
    lines = ["## Template robustness", ""]
    headers = ["Role", "Template", *datasets, "Average", "Reference", "Flags"]
    lines.append("| " + " | ".join(headers) + " |")
    lines.append("|" + "|".join(["---"] * len(headers)) + "|")
    for row in report.rows:
        flags = []
        if row.selected:
            flags.append("selected")
        if row.misleading:
            flags.append("misleading")
        lines.append(
            "| "
            + " | ".join(
                [
                    row.role,
                    f"{row.template_id}: {row.body}",
                    *[_fmt(row.alignment.get(d), 4) for d in datasets],
                    _fmt(row.average, 4),
                    _reference_note(row) or "-",
                    ",".join(flags),
                ]
            )
            + " |"
        )
    lines.append("")
    lines.append(
        "Reference values are alignments measured for the stock templates in "
        "the original template study; computed alignments are embedder-relative "
        "and are not expected to reproduce them."
    )
    lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def render_robustness_figure(report: RobustnessReport, path: str | Path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(9, 0.5 * len(report.rows) + 2))
    labels = [f"[{r.role}] {r.template_id}" for r in report.rows]
    values = [r.average for r in report.rows]
    colors = [
        "tab:red" if r.misleading else ("tab:green" if r.selected else "tab:blue")
        for r in report.rows
    ]
    ys = range(len(report.rows))
    ax.barh(list(ys), values, color=colors)
    ax.set_yticks(list(ys))
    ax.set_yticklabels(labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("average alignment")
    ax.set_title("Bridge template alignment (green=selected, red=misleading)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
