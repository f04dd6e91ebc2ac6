"""Scoring detections against labeled sequences.

Matching rules: a label is credited one true positive if any predicted
range overlaps it, no matter how many predictions hit it; labels nobody
overlaps are false negatives; predictions overlapping no label are false
positives. A prediction spanning several labels credits each of them and is
itself not a false positive.

Undefined metrics (zero denominators) stay None rather than being coerced
to 0, so "no predictions" is distinguishable from "all wrong".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageMismatchError
from .model import LabelSet

Range = tuple[int, int]


@dataclass
class MatchReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched_pairs: list[tuple[Range, int]] = field(default_factory=list)
    unmatched_predictions: list[Range] = field(default_factory=list)
    unmatched_labels: list[int] = field(default_factory=list)

    def merge(self, other: "MatchReport", label_offset: int = 0) -> "MatchReport":
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.matched_pairs += [(r, i + label_offset) for r, i in other.matched_pairs]
        self.unmatched_predictions += other.unmatched_predictions
        self.unmatched_labels += [i + label_offset for i in other.unmatched_labels]
        return self


@dataclass(frozen=True)
class MetricsRow:
    precision: float | None
    recall: float | None
    f_beta: float | None
    beta: float = 0.5
    slice_name: str = "all"
    tp: int = 0
    fp: int = 0
    fn: int = 0


def _overlaps(a: Range, b: Range) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def match_sequences(predicted: list[Range], labels: list[Range]) -> MatchReport:
    """Apply the TP/FP/FN rules to one channel's ranges."""
    report = MatchReport()
    matched_labels = set()
    for pred in sorted(predicted):
        hit = [i for i, label in enumerate(labels) if _overlaps(pred, label)]
        if hit:
            for i in hit:
                if i not in matched_labels:
                    matched_labels.add(i)
                    report.matched_pairs.append((pred, i))
        else:
            report.fp += 1
            report.unmatched_predictions.append(pred)
    report.tp = len(matched_labels)
    report.unmatched_labels = [i for i in range(len(labels)) if i not in matched_labels]
    report.fn = len(report.unmatched_labels)
    return report


def precision_recall_fbeta(report: MatchReport, beta: float = 0.5,
                           slice_name: str = "all") -> MetricsRow:
    """Precision, recall, and F-beta; zero-denominator fields stay None."""
    precision = report.tp / (report.tp + report.fp) if report.tp + report.fp > 0 else None
    recall = report.tp / (report.tp + report.fn) if report.tp + report.fn > 0 else None
    f_beta = None
    if precision is not None and recall is not None:
        if precision == 0.0 and recall == 0.0:
            f_beta = 0.0
        else:
            b2 = beta * beta
            f_beta = (1 + b2) * precision * recall / (b2 * precision + recall)
    return MetricsRow(precision=precision, recall=recall, f_beta=f_beta, beta=beta,
                      slice_name=slice_name, tp=report.tp, fp=report.fp, fn=report.fn)


def evaluate_channels(predicted_by_channel: dict[str, list[Range]],
                      labels: LabelSet) -> MatchReport:
    """Aggregate matching over channels; channels without labels contribute
    only false positives."""
    total = MatchReport()
    offset = 0
    channel_ids = sorted(set(predicted_by_channel) | set(labels.channel_ids()))
    for cid in channel_ids:
        channel_labels = labels.for_channel(cid)
        ranges = [(e.start, e.end) for e in channel_labels]
        report = match_sequences(predicted_by_channel.get(cid, []), ranges)
        total.merge(report, label_offset=offset)
        offset += len(ranges)
    return total


def breakdown_by_type(predicted_by_channel: dict[str, list[Range]],
                      labels: LabelSet, beta: float = 0.5) -> list[MetricsRow]:
    """Recall per label class; precision is not sliced because false
    positives carry no class."""
    rows = []
    for cls in ("point", "contextual"):
        subset = LabelSet(entries=tuple(e for e in labels.entries if e.cls == cls))
        if len(subset) == 0:
            rows.append(MetricsRow(precision=None, recall=None, f_beta=None,
                                   beta=beta, slice_name=cls))
            continue
        report = evaluate_channels(
            {cid: predicted_by_channel.get(cid, []) for cid in subset.channel_ids()},
            subset,
        )
        recall = report.tp / (report.tp + report.fn)
        rows.append(MetricsRow(precision=None, recall=recall, f_beta=None, beta=beta,
                               slice_name=cls, tp=report.tp, fn=report.fn))
    return rows


def breakdown_by_tag(predicted_by_channel: dict[str, list[Range]],
                     labels: LabelSet, beta: float = 0.5) -> list[MetricsRow]:
    """One row per label tag (e.g. spacecraft), when tags are present."""
    tags = sorted({e.tag for e in labels.entries if e.tag})
    rows = []
    for tag in tags:
        subset = LabelSet(entries=tuple(e for e in labels.entries if e.tag == tag))
        tagged_channels = subset.channel_ids()
        report = evaluate_channels(
            {cid: predicted_by_channel.get(cid, []) for cid in tagged_channels}, subset
        )
        rows.append(precision_recall_fbeta(report, beta=beta, slice_name=f"tag:{tag}"))
    return rows


def compare_methods(results_by_method: dict[str, dict[str, list[Range]]],
                    labels: LabelSet, beta: float = 0.5) -> list[tuple[str, MetricsRow]]:
    """One overall row plus per-type recall rows for each method.

    All methods must cover the same channel set; mismatched coverage makes
    row-to-row comparison meaningless and is rejected.
    """
    coverages = {m: frozenset(pred) for m, pred in results_by_method.items()}
    distinct = set(coverages.values())
    if len(distinct) > 1:
        detail = "; ".join(
            f"{m}: {sorted(cov)}" for m, cov in sorted(coverages.items())
        )
        raise CoverageMismatchError(f"methods cover different channels ({detail})")
    rows: list[tuple[str, MetricsRow]] = []
    for method in sorted(results_by_method):
        predicted = results_by_method[method]
        report = evaluate_channels(predicted, labels)
        rows.append((method, precision_recall_fbeta(report, beta=beta)))
        for row in breakdown_by_type(predicted, labels, beta=beta):
            rows.append((method, row))
        for row in breakdown_by_tag(predicted, labels, beta=beta):
            rows.append((method, row))
    return rows


def mean_normalized_prediction_error(actuals, predictions) -> float | None:
    """Mean absolute error divided by the channel's observed value range.

    The range is max - min of dimension 0 over the provided series (the
    caller passes the evaluated span). Returns None for zero-range channels,
    which the aggregate skips with a flag.
    """
    from .prediction import compute_errors

    value_range = float(np.max(actuals.telemetry) - np.min(actuals.telemetry))
    if value_range == 0.0:
        return None
    errors = compute_errors(actuals, predictions)
    return float(np.mean(errors.errors)) / value_range


def aggregate_prediction_error(pairs) -> tuple[float | None, list[str]]:
    """Average the per-channel normalized error; returns (mean, excluded)."""
    values = []
    excluded = []
    for actuals, predictions in pairs:
        v = mean_normalized_prediction_error(actuals, predictions)
        if v is None:
            excluded.append(actuals.channel_id)
        else:
            values.append(v)
    return (float(np.mean(values)) if values else None), excluded


def render_table(rows: list[tuple[str, MetricsRow]]) -> str:
    """Aligned plain-text rendering of comparison rows."""
    header = f"{'method':<34}{'slice':<16}{'precision':>10}{'recall':>10}{'f_beta':>10}"
    lines = [header, "-" * len(header)]
    for method, row in rows:
        def fmt(v):
            return f"{v:.3f}" if v is not None else "n/a"
        lines.append(
            f"{method:<34}{row.slice_name:<16}{fmt(row.precision):>10}"
            f"{fmt(row.recall):>10}{fmt(row.f_beta):>10}"
        )
    return "\n".join(lines)


def rows_to_csv(rows: list[tuple[str, MetricsRow]]) -> str:
    lines = ["method,slice,precision,recall,f_beta,tp,fp,fn"]
    for method, row in rows:
        def fmt(v):
            return "" if v is None else f"{v:.6f}"
        lines.append(
            f"{method},{row.slice_name},{fmt(row.precision)},{fmt(row.recall)},"
            f"{fmt(row.f_beta)},{row.tp},{row.fp},{row.fn}"
        )
    return "\n".join(lines) + "\n"
