"""Plain-text tables and CSV fragments for the comparison reports.

Four artifact families: a per-technique x per-model accuracy table, per-epoch
training curves as CSV, a per-label F1 table, the Q/F comparison table, and
pairwise McNemar grids with an NA diagonal.  Numbers render with three
decimals, trailing zeros trimmed.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

__all__ = [
    "fmt_stat",
    "render_table",
    "render_accuracy_table",
    "render_f1_table",
    "render_qf_table",
    "render_mcnemar_grid",
    "curves_csv",
    "accuracy_csv",
    "f1_csv",
    "qf_csv",
    "mcnemar_csv",
]

LABEL_COLUMNS = ("Downstairs", "Walking", "Upstairs")


def fmt_stat(x: float | None) -> str:
    """Three decimal places with trailing zeros trimmed; NA for missing."""
    if x is None:
        return "NA"
    if math.isnan(x):
        return "NA"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-0") else "0"


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]],
                 title: str | None = None) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def render_accuracy_table(
    accuracy: Mapping[str, Mapping[str, tuple[float, float]]]
) -> str:
    """Mean (std) cross-validation accuracy per technique and model."""
    models = sorted({m for by_model in accuracy.values() for m in by_model})
    headers = ["technique"] + models
    rows = []
    for technique in sorted(accuracy):
        row = [technique]
        for m in models:
            if m in accuracy[technique]:
                mean, std = accuracy[technique][m]
                row.append(f"{fmt_stat(mean)} ({fmt_stat(std)})")
            else:
                row.append("NA")
        rows.append(row)
    return render_table(headers, rows, title="Cross-validated accuracy, mean (std)")


def render_f1_table(f1: Mapping[str, Mapping[str, float]]) -> str:
    """Per-label F1 score for each technique."""
    headers = ["technique", *LABEL_COLUMNS]
    rows = [
        [technique] + [fmt_stat(f1[technique].get(label)) for label in LABEL_COLUMNS]
        for technique in sorted(f1)
    ]
    return render_table(headers, rows, title="F1 score per label")


def render_qf_table(
    qf: Mapping[str, tuple[float, float, float, float]]
) -> str:
    """Cochran's Q and F test per technique, with adjusted p values."""
    headers = ["technique", "cochran_q", "q_p", "f_test", "f_p"]
    rows = [
        [technique, *(fmt_stat(v) for v in qf[technique])]
        for technique in sorted(qf)
    ]
    return render_table(
        headers, rows,
        title="Classifier comparison: Cochran's Q and F test (Bonferroni-adjusted p)",
    )


def render_mcnemar_grid(models: Sequence[str], p_values: Mapping[tuple[str, str], float],
                        title: str) -> str:
    """Symmetric pairwise p-value grid with NA on the diagonal."""
    headers = ["model", *models]
    rows = []
    for a in models:
        row = [a]
        for b in models:
            if a == b:
                row.append("NA")
            else:
                key = (a, b) if (a, b) in p_values else (b, a)
                row.append(fmt_stat(p_values.get(key)))
        rows.append(row)
    return render_table(headers, rows, title=title)


def _csv(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    lines = [",".join(headers)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    return "\n".join(lines) + "\n"


def accuracy_csv(fold_accuracy: Mapping[str, Mapping[str, Sequence[float]]]) -> str:
    rows = []
    for technique in sorted(fold_accuracy):
        for model in sorted(fold_accuracy[technique]):
            for fold, acc in enumerate(fold_accuracy[technique][model]):
                rows.append([technique, model, fold, repr(float(acc))])
    return _csv(["mechanism", "model", "fold", "accuracy"], rows)


def curves_csv(
    curves: Mapping[str, Mapping[str, Sequence[tuple[Sequence[float], Sequence[float]]]]]
) -> str:
    """Per-epoch training curves: curves[technique][model][fold] = (loss, acc)."""
    rows = []
    for technique in sorted(curves):
        for model in sorted(curves[technique]):
            for fold, (losses, accs) in enumerate(curves[technique][model]):
                for epoch, (loss, acc) in enumerate(zip(losses, accs)):
                    rows.append(
                        [technique, model, fold, epoch, repr(float(loss)), repr(float(acc))]
                    )
    return _csv(
        ["mechanism", "model", "fold", "epoch", "train_loss", "train_accuracy"], rows
    )


def f1_csv(f1: Mapping[str, Mapping[str, float]]) -> str:
    rows = []
    for technique in sorted(f1):
        for label in LABEL_COLUMNS:
            if label in f1[technique]:
                rows.append([technique, label, repr(float(f1[technique][label]))])
    return _csv(["mechanism", "label", "f1"], rows)


def qf_csv(qf: Mapping[str, tuple[float, float, float, float]]) -> str:
    rows = [
        [technique, *(repr(float(v)) for v in qf[technique])]
        for technique in sorted(qf)
    ]
    return _csv(["mechanism", "cochran_q", "q_p", "f_test", "f_p"], rows)


def mcnemar_csv(grids: Mapping[str, Mapping[tuple[str, str], float]]) -> str:
    rows = []
    for technique in sorted(grids):
        for (a, b), p in sorted(grids[technique].items()):
            rows.append([technique, a, b, repr(float(p))])
    return _csv(["mechanism", "model_a", "model_b", "p"], rows)
