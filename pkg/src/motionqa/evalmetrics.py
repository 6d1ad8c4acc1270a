"""Evaluation protocol for SSIM predictors.

Residual statistics (max-likelihood normal fit), regression scatter with a
linear fit, confusion matrices with per-class precision/recall/f1 plus
macro/weighted averages, and the clinical agreement rate against expert
class ratings.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binning import ClassScheme, bin_of, class_ranges, clinical, range_label


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    ssim_pred: float
    ssim_true: float | None = None
    subjective_class: int | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.ssim_pred):
            raise ValueError(f"{self.id}: prediction must be finite, got {self.ssim_pred}")
        if self.ssim_true is not None and not 0.0 <= self.ssim_true <= 1.0:
            raise ValueError(f"{self.id}: ground truth must be in [0, 1], got {self.ssim_true}")


@dataclass(frozen=True)
class ResidualStats:
    mu: float
    sigma: float
    n: int


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassReport:
    scheme: ClassScheme
    per_class: list[ClassMetrics]
    macro_avg: tuple[float, float, float]
    weighted_avg: tuple[float, float, float]
    accuracy: float
    confusion: np.ndarray = field(repr=False)
    zero_division_classes: list[int] = field(default_factory=list)


def residuals(preds: list[PredictionRecord]) -> list[float]:
    """Prediction minus ground truth, order preserving."""
    missing = [p.id for p in preds if p.ssim_true is None]
    if missing:
        raise ValueError(f"{len(missing)} row(s) without ground truth (first: {missing[0]})")
    return [p.ssim_pred - p.ssim_true for p in preds]


def residual_stats(res: list[float]) -> ResidualStats:
    """Maximum-likelihood normal fit: mean and population (1/n) std."""
    if len(res) < 2:
        raise ValueError(f"need at least 2 residuals, got {len(res)}")
    arr = np.asarray(res, dtype=np.float64)
    return ResidualStats(mu=float(arr.mean()), sigma=float(arr.std(ddof=0)), n=arr.size)


def linear_fit(preds: list[PredictionRecord]) -> tuple[float, float]:
    """Ordinary least squares of prediction on ground truth."""
    if any(p.ssim_true is None for p in preds):
        raise ValueError("linear fit needs ground truth on every row")
    t = np.asarray([p.ssim_true for p in preds], dtype=np.float64)
    y = np.asarray([p.ssim_pred for p in preds], dtype=np.float64)
    if t.size < 2:
        raise ValueError(f"need at least 2 points, got {t.size}")
    t_mean = t.mean()
    var = float(((t - t_mean) ** 2).sum())
    if var == 0.0:
        raise ValueError("ground truth has zero variance; the fit is undefined")
    slope = float(((t - t_mean) * (y - y.mean())).sum() / var)
    return slope, float(y.mean() - slope * t_mean)


def confusion_matrix(true_labels: list[int], pred_labels: list[int], k: int) -> np.ndarray:
    """K x K counts, rows = true class, columns = predicted class."""
    cm = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        cm[t - 1, p - 1] += 1
    return cm


def classification_report(preds: list[PredictionRecord], scheme: ClassScheme) -> ClassReport:
    """Bin predictions and truths under a scheme and score the classes.

    Predictions are clamped into [0, 1] before binning (a sigmoid-head
    regressor cannot leave the range, but CSV input may carry rounding
    spill). All K classes appear in the report; zero-division metrics are 0
    and the affected classes are flagged.
    """
    if not preds:
        raise ValueError("cannot build a classification report from zero rows")
    if any(p.ssim_true is None for p in preds):
        raise ValueError("classification report needs ground truth on every row")
    true_labels = [bin_of(p.ssim_true, scheme) for p in preds]
    pred_labels = [bin_of(min(max(p.ssim_pred, 0.0), 1.0), scheme) for p in preds]

    k = scheme.n_classes
    cm = confusion_matrix(true_labels, pred_labels, k)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)

    zero_div = []
    per_class = []
    for i in range(k):
        if predicted[i] == 0:
            zero_div.append(i + 1)
        precision = float(tp[i] / predicted[i]) if predicted[i] else 0.0
        if support[i] == 0 and (i + 1) not in zero_div:
            zero_div.append(i + 1)
        recall = float(tp[i] / support[i]) if support[i] else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class.append(ClassMetrics(i + 1, precision, recall, f1, int(support[i])))

    total = int(cm.sum())
    accuracy = float(tp.sum() / total)
    macro = tuple(float(np.mean([getattr(c, m) for c in per_class])) for m in ("precision", "recall", "f1"))
    weighted = tuple(
        float(sum(getattr(c, m) * c.support for c in per_class) / total) for m in ("precision", "recall", "f1")
    )
    return ClassReport(scheme, per_class, macro, weighted, accuracy, cm, sorted(zero_div))


def agreement_rate(preds: list[PredictionRecord], scheme: ClassScheme | None = None) -> float:
    """Percentage of rows whose prediction lands inside the SSIM range of
    the expert's class (clinical scheme unless overridden)."""
    scheme = scheme if scheme is not None else clinical()
    missing = [p.id for p in preds if p.subjective_class is None]
    if missing:
        raise ValueError(f"{len(missing)} row(s) without a subjective class (first: {missing[0]})")
    if not preds:
        raise ValueError("cannot compute agreement over zero rows")
    ranges = class_ranges(scheme)
    agree = 0
    for p in preds:
        if not 1 <= p.subjective_class <= scheme.n_classes:
            raise ValueError(f"{p.id}: subjective class {p.subjective_class} outside 1..{scheme.n_classes}")
        lo, hi = ranges[p.subjective_class - 1]
        inside = lo <= p.ssim_pred <= hi if hi == 1.0 else lo <= p.ssim_pred < hi
        agree += int(inside)
    return 100.0 * agree / len(preds)


# ---------------------------------------------------------------------------
# interface files: prediction/subjective CSVs and emitted reports


def read_prediction_csv(path: str | Path) -> dict[str, float]:
    """id -> predicted SSIM; header must be exactly 'id,ssim_pred'."""
    return _read_two_column_csv(path, "ssim_pred", float)


def read_subjective_csv(path: str | Path) -> dict[str, int]:
    """id -> expert class; header must be exactly 'id,subjective_class'."""
    return _read_two_column_csv(path, "subjective_class", int)


def _read_two_column_csv(path, value_column, cast):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", value_column]:
            raise ValueError(f"{path}: expected header 'id,{value_column}', got {reader.fieldnames}")
        out = {}
        for row in reader:
            if row["id"] in out:
                raise ValueError(f"{path}: duplicate id {row['id']!r}")
            out[row["id"]] = cast(row[value_column])
    return out


def join_predictions(
    preds_by_id: dict[str, float],
    truths_by_id: dict[str, float] | None = None,
    subjective_by_id: dict[str, int] | None = None,
) -> list[PredictionRecord]:
    """Match predictions to truths/ratings by id, in sorted-id order."""
    records = []
    for pid in sorted(preds_by_id):
        truth = None
        if truths_by_id is not None:
            if pid not in truths_by_id:
                raise ValueError(f"prediction id {pid!r} not present in the manifest")
            truth = truths_by_id[pid]
        subj = subjective_by_id.get(pid) if subjective_by_id is not None else None
        records.append(PredictionRecord(pid, preds_by_id[pid], truth, subj))
    return records


def format_report_table(report: ClassReport) -> str:
    """Fixed-width text table: per-class rows, accuracy, macro and weighted
    averages, with the SSIM range printed next to each class label."""
    rows = []
    name_w = max(len(f"{c.label} {range_label(report.scheme, c.label)}") for c in report.per_class)
    name_w = max(name_w, len("weighted avg"))
    header = f"{'Class (SSIM)':<{name_w}}  {'Prec.':>6}  {'Recall':>6}  {'f1-score':>8}  {'Support':>8}"
    rows.append(header)
    for c in report.per_class:
        name = f"{c.label} {range_label(report.scheme, c.label)}"
        rows.append(f"{name:<{name_w}}  {c.precision:>6.2f}  {c.recall:>6.2f}  {c.f1:>8.2f}  {c.support:>8d}")
    total = int(report.confusion.sum())
    rows.append("")
    rows.append(f"{'accuracy':<{name_w}}  {'':>6}  {'':>6}  {report.accuracy:>8.2f}  {total:>8d}")
    for name, avg in (("macro avg", report.macro_avg), ("weighted avg", report.weighted_avg)):
        rows.append(f"{name:<{name_w}}  {avg[0]:>6.2f}  {avg[1]:>6.2f}  {avg[2]:>8.2f}  {total:>8d}")
    if report.zero_division_classes:
        rows.append("")
        rows.append(f"zero-division classes (metrics forced to 0): {report.zero_division_classes}")
    return "\n".join(rows) + "\n"


def report_to_json_dict(report: ClassReport) -> dict:
    return {
        "scheme": {"kind": report.scheme.kind, "edges": list(report.scheme.edges)},
        "classes": [
            {
                "label": c.label,
                "range": list(class_ranges(report.scheme)[c.label - 1]),
                "precision": c.precision,
                "recall": c.recall,
                "f1": c.f1,
                "support": c.support,
            }
            for c in report.per_class
        ],
        "accuracy": report.accuracy,
        "macro_avg": {"precision": report.macro_avg[0], "recall": report.macro_avg[1], "f1": report.macro_avg[2]},
        "weighted_avg": {
            "precision": report.weighted_avg[0],
            "recall": report.weighted_avg[1],
            "f1": report.weighted_avg[2],
        },
        "confusion": report.confusion.tolist(),
        "confusion_row_normalized": normalized_confusion(report.confusion).tolist(),
        "zero_division_classes": report.zero_division_classes,
    }


def normalized_confusion(cm: np.ndarray) -> np.ndarray:
    """Row-normalized counts; all-zero rows stay zero."""
    sums = cm.sum(axis=1, keepdims=True).astype(np.float64)
    out = np.divide(cm, sums, out=np.zeros(cm.shape, dtype=np.float64), where=sums > 0)
    return out


def write_confusion_csv(cm: np.ndarray, path: str | Path, normalized: bool = False) -> None:
    path = Path(path)
    data = normalized_confusion(cm) if normalized else cm
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + [str(i + 1) for i in range(cm.shape[1])])
        for i, row in enumerate(data):
            writer.writerow([str(i + 1)] + [f"{v:.6f}" if normalized else str(int(v)) for v in row])


def write_scatter_csv(preds: list[PredictionRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "ssim_true", "ssim_pred"])
        for p in preds:
            writer.writerow([p.id, f"{p.ssim_true:.6f}", f"{p.ssim_pred:.6f}"])


def write_prediction_csv(preds_by_id: dict[str, float], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "ssim_pred"])
        for pid in sorted(preds_by_id):
            writer.writerow([pid, f"{preds_by_id[pid]:.6f}"])


def scatter_svg(preds: list[PredictionRecord], fit: tuple[float, float], stats: ResidualStats) -> str:
    """Deterministic SVG: prediction-vs-truth scatter with the identity and
    fitted lines, plus a residual histogram underneath."""
    w, h, pad = 640, 420, 45
    hist_h = 160

    def sx(v):
        return pad + v * (w - 2 * pad)

    def sy(v):
        return h - pad - v * (h - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + hist_h}" '
        f'viewBox="0 0 {w} {h + hist_h}">',
        f'<rect width="{w}" height="{h + hist_h}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" fill="none" stroke="black"/>',
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(1):.1f}" '
        'stroke="gray" stroke-dasharray="4 3"/>',
    ]
    slope, intercept = fit
    y0, y1 = intercept, slope + intercept
    parts.append(
        f'<line x1="{sx(0):.1f}" y1="{sy(min(max(y0, 0), 1)):.1f}" '
        f'x2="{sx(1):.1f}" y2="{sy(min(max(y1, 0), 1)):.1f}" stroke="crimson"/>'
    )
    for p in preds:
        px = min(max(p.ssim_pred, 0.0), 1.0)
        parts.append(f'<circle cx="{sx(p.ssim_true):.2f}" cy="{sy(px):.2f}" r="1.5" fill="steelblue" fill-opacity="0.5"/>')
    parts.append(
        f'<text x="{w / 2:.0f}" y="{h - 8}" text-anchor="middle" font-size="12">ground truth SSIM</text>'
    )
    parts.append(
        f'<text x="{w / 2:.0f}" y="16" text-anchor="middle" font-size="12">'
        f'fit: pred = {slope:.4f}*true + {intercept:.4f}</text>'
    )

    res = [p.ssim_pred - p.ssim_true for p in preds]
    nbins = 40
    lo = min(min(res), -1e-6)
    hi = max(max(res), 1e-6)
    counts, edges = np.histogram(res, bins=nbins, range=(lo, hi))
    peak = max(int(counts.max()), 1)
    base = h + hist_h - 30
    for i, c in enumerate(counts):
        x0 = pad + (edges[i] - lo) / (hi - lo) * (w - 2 * pad)
        x1 = pad + (edges[i + 1] - lo) / (hi - lo) * (w - 2 * pad)
        bh = (hist_h - 50) * (int(c) / peak)
        parts.append(
            f'<rect x="{x0:.2f}" y="{base - bh:.2f}" width="{max(x1 - x0 - 0.5, 0.5):.2f}" '
            f'height="{bh:.2f}" fill="steelblue"/>'
        )
    parts.append(
        f'<text x="{w / 2:.0f}" y="{h + hist_h - 10}" text-anchor="middle" font-size="12">'
        f'residuals: mu={stats.mu:.4f}, sigma={stats.sigma:.4f}, n={stats.n}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_regression_report(
    preds: list[PredictionRecord],
    out_dir: str | Path,
    svg: bool = False,
) -> dict:
    """Residual stats + linear fit as JSON, scatter CSV, optional SVG."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = residuals(preds)
    stats = residual_stats(res)
    slope, intercept = linear_fit(preds)
    payload = {
        "n": stats.n,
        "residual_mu": stats.mu,
        "residual_sigma": stats.sigma,
        "fit_slope": slope,
        "fit_intercept": intercept,
    }
    (out_dir / "regression_report.json").write_text(json.dumps(payload, indent=2) + "\n")
    write_scatter_csv(preds, out_dir / "scatter.csv")
    if svg:
        (out_dir / "regression.svg").write_text(scatter_svg(preds, (slope, intercept), stats))
    return payload


def emit_classification_report(report: ClassReport, out_dir: str | Path) -> dict:
    """JSON report, text table and raw/normalized confusion CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = report_to_json_dict(report)
    (out_dir / "classification_report.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out_dir / "classification_report.txt").write_text(format_report_table(report))
    write_confusion_csv(report.confusion, out_dir / "confusion.csv")
    write_confusion_csv(report.confusion, out_dir / "confusion_normalized.csv", normalized=True)
    return payload
