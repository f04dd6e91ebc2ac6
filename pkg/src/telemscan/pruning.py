"""False-positive mitigation for detected anomaly sequences.

Two mechanisms: percent-decrease pruning over descending sequence peaks,
and a learned per-channel minimum severity score below which future
detections are reclassified as nominal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prediction import SmoothedErrorWindow
from .thresholding import AnomalySequence, SequenceStatus

DEFAULT_MIN_PERCENT_DECREASE = 0.13

# Apply s_min only to channels confirming more than one anomaly per ten
# evaluated windows; noisier channels are where repeat scores carry signal.
DEFAULT_ANOMALY_RATE_THRESHOLD = 0.1


@dataclass(frozen=True)
class PruneInput:
    """Descending sequence peaks plus one trailing nominal maximum.

    ``order`` maps each peak position back to its index in the sequence list
    handed to :func:`build_emax`.
    """

    e_max: tuple[float, ...]
    p: float
    order: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")
        peaks = self.e_max[:-1]
        if any(b > a for a, b in zip(peaks, peaks[1:])):
            raise ValueError("sequence peaks must be sorted descending")


@dataclass
class ChannelPolicy:
    """Per-channel minimum-score policy learned from labeled history."""

    channel_id: str
    s_min: float | None = None
    anomaly_rate_threshold: float = DEFAULT_ANOMALY_RATE_THRESHOLD

    def __post_init__(self):
        if self.s_min is not None and self.s_min < 0:
            raise ValueError("s_min must be >= 0 when present")


def build_emax(sequences: list[AnomalySequence], window: SmoothedErrorWindow,
               epsilon: float, p: float = DEFAULT_MIN_PERCENT_DECREASE) -> PruneInput:
    """Peaks sorted descending (ties by sequence start), then the maximum
    non-anomalous smoothed error; 0 when every window value is anomalous."""
    nominal = window.values[window.values <= epsilon]
    nominal_max = float(np.max(nominal)) if len(nominal) else 0.0
    return _assemble_prune_input(sequences, nominal_max, p)


def build_emax_from_mask(sequences: list[AnomalySequence], values: np.ndarray,
                         flagged: np.ndarray, p: float = DEFAULT_MIN_PERCENT_DECREASE
                         ) -> PruneInput:
    """Variant for detectors that flag steps directly instead of thresholding.

    Unlike thresholding, flagging does not order values, so the nominal
    maximum is clamped below the smallest peak to keep e_max descending.
    """
    nominal = values[~flagged]
    nominal_max = float(np.max(nominal)) if len(nominal) else 0.0
    if sequences:
        nominal_max = min(nominal_max, min(s.peak_value for s in sequences))
    return _assemble_prune_input(sequences, nominal_max, p)


def _assemble_prune_input(sequences: list[AnomalySequence], nominal_max: float,
                          p: float) -> PruneInput:
    ranked = sorted(range(len(sequences)),
                    key=lambda i: (-sequences[i].peak_value, sequences[i].start))
    peaks = tuple(sequences[i].peak_value for i in ranked)
    return PruneInput(e_max=peaks + (nominal_max,), p=p, order=tuple(ranked))


def percent_decreases(e_max) -> list[float]:
    """d(i) = (e_max[i-1] - e_max[i]) / e_max[i-1] for i = 1..len-1."""
    out = []
    for prev, cur in zip(e_max, e_max[1:]):
        out.append(0.0 if prev == 0.0 else (prev - cur) / prev)
    return out


def prune_sequences(prune_input: PruneInput,
                    sequences: list[AnomalySequence]) -> list[AnomalySequence]:
    """Confirm or prune candidate sequences by the percent-decrease rule.

    A peak stays anomalous iff some drop at or below its position in the
    descending e_max order meets the minimum percent decrease p; only
    statuses change, never ranges or scores.
    """
    decreases = percent_decreases(prune_input.e_max)
    keep_until = 0  # positions < keep_until stay anomalous
    for i, d in enumerate(decreases, start=1):
        if d >= prune_input.p:
            keep_until = i
    for position, seq_index in enumerate(prune_input.order):
        seq = sequences[seq_index]
        seq.status = (
            SequenceStatus.CONFIRMED if position < keep_until else SequenceStatus.PRUNED
        )
    return sequences


def learn_smin(history, policy: str = "label_max", quantile: float = 0.9,
               channel_id: str = "",
               anomaly_rate_threshold: float = DEFAULT_ANOMALY_RATE_THRESHOLD
               ) -> ChannelPolicy:
    """Derive an s_min from scored history.

    ``history`` is an iterable of (score, label) with label in
    {"tp", "fp", "unlabeled"}. Policy ``label_max`` takes the highest
    confirmed false-positive score; ``quantile`` takes the q-quantile of all
    historical scores using the inverted-CDF convention (smallest score whose
    cumulative fraction reaches q), which keeps the result an observed score.
    """
    scores = [float(s) for s, _ in history]
    s_min: float | None = None
    if policy == "label_max":
        fp_scores = [float(s) for s, label in history if label == "fp"]
        if fp_scores:
            s_min = max(fp_scores)
    elif policy == "quantile":
        if scores:
            s_min = float(np.quantile(np.array(scores), quantile, method="inverted_cdf"))
    else:
        raise ValueError(f"unknown s_min policy {policy!r}")
    return ChannelPolicy(channel_id=channel_id, s_min=s_min,
                         anomaly_rate_threshold=anomaly_rate_threshold)


def apply_smin(sequences: list[AnomalySequence],
               policy: ChannelPolicy) -> list[AnomalySequence]:
    """Prune sequences scoring strictly below s_min; no-op when unset."""
    if policy.s_min is None:
        return sequences
    for seq in sequences:
        if seq.status is not SequenceStatus.PRUNED and seq.score < policy.s_min:
            seq.status = SequenceStatus.PRUNED
    return sequences
