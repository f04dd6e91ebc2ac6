"""Nonparametric threshold selection over smoothed prediction errors.

A candidate threshold eps = mean + z * std is scored by how strongly
removing everything above it shrinks the window's mean and standard
deviation, penalized by the count of removed points and the squared count
of their contiguous runs. The best candidate over the z grid wins.

Statistics are population moments (divide by n) throughout, used
consistently for eps, the delta terms, and severity scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateWindowError, EmptyCandidateError, ContractViolationError
from .prediction import SmoothedErrorWindow


class SequenceStatus(str, Enum):
    CANDIDATE = "candidate"
    PRUNED = "pruned"
    CONFIRMED = "confirmed"


@dataclass(frozen=True)
class ZGrid:
    """Ordered z candidates; the paper-backed default is 2.5..10.0 step 0.5."""

    values: tuple[float, ...] = ()

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values) or tuple(
            np.arange(2.5, 10.0 + 1e-9, 0.5)
        )
        object.__setattr__(self, "values", vals)
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("z grid must be strictly increasing")
        if vals[0] < 2.0:
            raise ValueError("z values below 2 produce excessive false positives")

    @classmethod
    def from_range(cls, z_min: float, z_max: float, z_step: float) -> "ZGrid":
        if z_step <= 0 or z_max < z_min:
            raise ValueError("invalid z grid range")
        count = int(round((z_max - z_min) / z_step)) + 1
        return cls(values=tuple(z_min + k * z_step for k in range(count)))


@dataclass(frozen=True)
class ThresholdDecision:
    """The chosen threshold and everything derived from it."""

    epsilon: float
    z: float
    mean: float
    sd: float
    delta_mean: float
    delta_sd: float
    anomalous: tuple[tuple[int, float], ...]  # (stream index, e_s) above epsilon
    sequences: tuple[tuple[int, int], ...]  # contiguous index ranges, inclusive
    objective: float


@dataclass
class AnomalySequence:
    """A contiguous run of above-threshold smoothed errors."""

    channel_id: str
    start: int
    end: int
    peak_index: int
    peak_value: float
    score: float
    status: SequenceStatus = SequenceStatus.CANDIDATE

    def intersects(self, lo: int, hi: int) -> bool:
        return self.start <= hi and lo <= self.end


def contiguous_runs(indices: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive integers, as inclusive (start, end) pairs."""
    if len(indices) == 0:
        return []
    breaks = np.nonzero(np.diff(indices) != 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [len(indices) - 1]))
    return [(int(indices[a]), int(indices[b])) for a, b in zip(starts, ends)]


def extract_sequences(window: SmoothedErrorWindow, epsilon: float) -> list[tuple[int, int]]:
    """Maximal runs of consecutive stream indices with e_s > epsilon."""
    above = window.indices[window.values > epsilon]
    return contiguous_runs(above)


def threshold_objective(window: SmoothedErrorWindow, epsilon: float) -> float:
    """Percent decrease in mean and std from removing values above epsilon,
    per removed point and squared run count.

    Membership is strict on both sides: the removed set is {e_s > eps}, the
    retained set for the delta terms is {e_s < eps}; values equal to eps
    belong to neither.
    """
    values = window.values
    if len(values) == 0:
        raise DegenerateWindowError("empty window")
    mean = float(np.mean(values))
    sd = float(np.std(values))
    if sd == 0.0:
        raise DegenerateWindowError("window standard deviation is zero")
    above_mask = values > epsilon
    n_above = int(np.count_nonzero(above_mask))
    if n_above == 0:
        raise EmptyCandidateError(f"no smoothed errors above {epsilon}")
    below = values[values < epsilon]
    # For eps = mean + z*sd with z > 0 and sd > 0 the below set is never
    # empty; an arbitrary eps under the window minimum removes everything.
    below_mean = float(np.mean(below)) if len(below) else 0.0
    below_sd = float(np.std(below)) if len(below) else 0.0
    delta_mean = mean - below_mean
    delta_sd = sd - below_sd
    n_runs = len(contiguous_runs(window.indices[above_mask]))
    return (delta_mean / mean + delta_sd / sd) / (n_above + n_runs**2)


def select_threshold(window: SmoothedErrorWindow, grid: ZGrid) -> ThresholdDecision | None:
    """Pick the z in the grid whose eps = mean + z*std maximizes the objective.

    Returns None when the window is degenerate (zero spread) or no candidate
    leaves any value above its threshold; ties break toward larger z.
    """
    values = window.values
    if len(values) < 2:
        return None
    mean = float(np.mean(values))
    sd = float(np.std(values))
    if sd == 0.0:
        return None
    best: tuple[float, float, float] | None = None  # (objective, z, epsilon)
    for z in grid.values:
        epsilon = mean + z * sd
        try:
            objective = threshold_objective(window, epsilon)
        except EmptyCandidateError:
            continue
        if best is None or objective >= best[0]:
            best = (objective, z, epsilon)
    if best is None:
        return None
    objective, z, epsilon = best
    above_mask = values > epsilon
    below = values[values < epsilon]
    anomalous = tuple(
        (int(i), float(v)) for i, v in zip(window.indices[above_mask], values[above_mask])
    )
    sequences = tuple(contiguous_runs(window.indices[above_mask]))
    return ThresholdDecision(
        epsilon=epsilon,
        z=z,
        mean=mean,
        sd=sd,
        delta_mean=mean - float(np.mean(below)),
        delta_sd=sd - float(np.std(below)),
        anomalous=anomalous,
        sequences=sequences,
        objective=objective,
    )


def score_sequence(seq: tuple[int, int], window: SmoothedErrorWindow,
                   decision: ThresholdDecision) -> float:
    """Severity: peak height above the threshold, normalized by mean + std.

    Mean and std are the full-window values from before any removal.
    """
    lo, hi = seq
    mask = (window.indices >= lo) & (window.indices <= hi)
    if not np.any(mask):
        raise ContractViolationError(f"sequence ({lo},{hi}) outside window")
    peak = float(np.max(window.values[mask]))
    if peak <= decision.epsilon:
        raise ContractViolationError("sequence peak must exceed the threshold")
    return (peak - decision.epsilon) / (decision.mean + decision.sd)


def sequences_from_decision(window: SmoothedErrorWindow, decision: ThresholdDecision,
                            channel_id: str) -> list[AnomalySequence]:
    """Materialize scored candidate sequences from a threshold decision."""
    out = []
    for lo, hi in decision.sequences:
        mask = (window.indices >= lo) & (window.indices <= hi)
        vals = window.values[mask]
        idxs = window.indices[mask]
        peak_pos = int(np.argmax(vals))
        out.append(
            AnomalySequence(
                channel_id=channel_id,
                start=lo,
                end=hi,
                peak_index=int(idxs[peak_pos]),
                peak_value=float(vals[peak_pos]),
                score=score_sequence((lo, hi), window, decision),
                status=SequenceStatus.CANDIDATE,
            )
        )
    return out
