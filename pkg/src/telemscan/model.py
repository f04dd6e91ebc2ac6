"""Domain types and file ingestion for channels, labels, and predictions.

File formats (all CSV, UTF-8, 0-based integer step indices):
  channel:     header ``index,value,cmd_0,...,cmd_{k-1}``, one row per step
  labels:      header ``channel_id,start,end,class,t_a`` (optional ``tag`` column)
  predictions: header ``index,y_hat``

Loaded structures are immutable and safe to share across concurrent
per-channel pipelines.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateIndexError,
    InvalidLabelError,
    MissingFileError,
    NonBinaryCommandError,
    NonFiniteValueError,
    NonMonotonicIndexError,
    OverlappingLabelsError,
    RaggedRowError,
    UnknownLabelClassError,
)

LABEL_CLASSES = ("point", "contextual")

# Significant digits preserved by serialize/round-trip.
FLOAT_DIGITS = 12


@dataclass(frozen=True)
class ChannelSeries:
    """One telemetry channel: step indices plus an (n, m) value matrix.

    Column 0 is the telemetry value; columns 1..m-1 are one-hot command
    covariates restricted to {0, 1}.
    """

    channel_id: str
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("values must be a 2-D (steps, dims) array")
        object.__setattr__(self, "values", vals)
        if len(self.indices) != len(vals):
            raise ValueError("indices and values length mismatch")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise NonMonotonicIndexError(
                f"channel {self.channel_id}: step indices must be strictly increasing"
            )
        self.indices.setflags(write=False)
        vals.setflags(write=False)

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    @property
    def telemetry(self) -> np.ndarray:
        """Dimension-0 values (the physical telemetry stream)."""
        return self.values[:, 0]

    def __len__(self) -> int:
        return len(self.indices)

    def position_of(self, step_index: int) -> int:
        """Array position of a step index; raises KeyError when absent."""
        pos = int(np.searchsorted(self.indices, step_index))
        if pos >= len(self.indices) or self.indices[pos] != step_index:
            raise KeyError(f"step index {step_index} not in channel {self.channel_id}")
        return pos


@dataclass(frozen=True)
class LabelEntry:
    channel_id: str
    start: int
    end: int
    cls: str
    t_a: int
    tag: str = ""


@dataclass(frozen=True)
class LabelSet:
    """Expert-labeled anomalous ranges, non-overlapping per channel."""

    entries: tuple[LabelEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        per_channel: dict[str, list[LabelEntry]] = {}
        for e in self.entries:
            if e.start > e.end or not (e.start <= e.t_a <= e.end):
                raise InvalidLabelError(
                    f"label {e.channel_id} [{e.start},{e.end}] t_a={e.t_a}: "
                    "requires start <= t_a <= end"
                )
            if e.cls not in LABEL_CLASSES:
                raise UnknownLabelClassError(f"unknown label class {e.cls!r}")
            per_channel.setdefault(e.channel_id, []).append(e)
        for cid, entries in per_channel.items():
            entries.sort(key=lambda e: e.start)
            for a, b in zip(entries, entries[1:]):
                if b.start <= a.end:
                    raise OverlappingLabelsError(
                        f"channel {cid}: labels [{a.start},{a.end}] and "
                        f"[{b.start},{b.end}] overlap"
                    )

    def for_channel(self, channel_id: str) -> list[LabelEntry]:
        return [e for e in self.entries if e.channel_id == channel_id]

    def channel_ids(self) -> list[str]:
        return sorted({e.channel_id for e in self.entries})

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PredictionSeries:
    """Externally produced one-step-ahead predictions.

    A prediction stored at index t targets the actual dimension-0 value at
    step t (ingestion has already applied the one-step shift).
    """

    channel_id: str
    indices: np.ndarray
    y_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "y_hat", np.asarray(self.y_hat, dtype=np.float64))
        if len(self.indices) != len(self.y_hat):
            raise ValueError("indices and y_hat length mismatch")
        diffs = np.diff(self.indices)
        if np.any(diffs == 0):
            raise DuplicateIndexError(f"channel {self.channel_id}: duplicate prediction index")
        if np.any(diffs < 0):
            raise NonMonotonicIndexError(
                f"channel {self.channel_id}: prediction indices must be strictly increasing"
            )
        if not np.all(np.isfinite(self.y_hat)):
            raise NonFiniteValueError(f"channel {self.channel_id}: non-finite y_hat")
        self.indices.setflags(write=False)
        self.y_hat.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)


def _open_rows(path: str):
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        return iter(list(csv.reader(fh)))


def load_channel(path: str, channel_id: str | None = None) -> ChannelSeries:
    """Load a channel CSV; the channel id defaults to the file stem."""
    rows = _open_rows(path)
    try:
        header = next(rows)
    except StopIteration:
        raise RaggedRowError(f"{path}: empty file") from None
    if len(header) < 2 or header[0] != "index" or header[1] != "value":
        raise RaggedRowError(f"{path}: header must start with 'index,value'")
    for k, name in enumerate(header[2:]):
        if name != f"cmd_{k}":
            raise RaggedRowError(f"{path}: command column {k} must be named 'cmd_{k}'")
    m = len(header) - 1
    indices: list[int] = []
    values: list[list[float]] = []
    prev = None
    for rownum, row in enumerate(rows, start=2):
        if len(row) != m + 1:
            raise RaggedRowError(f"{path}:{rownum}: expected {m + 1} columns, got {len(row)}")
        try:
            idx = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise NonFiniteValueError(f"{path}:{rownum}: unparseable value ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteValueError(f"{path}:{rownum}: non-finite value")
        if prev is not None and idx <= prev:
            raise NonMonotonicIndexError(f"{path}:{rownum}: index {idx} not > {prev}")
        for k, v in enumerate(vals[1:]):
            if v not in (0.0, 1.0):
                raise NonBinaryCommandError(f"{path}:{rownum}: cmd_{k} value {v} not in {{0,1}}")
        prev = idx
        indices.append(idx)
        values.append(vals)
    if channel_id is None:
        channel_id = os.path.splitext(os.path.basename(path))[0]
    arr = np.array(values, dtype=np.float64).reshape(len(values), m)
    return ChannelSeries(channel_id=channel_id, indices=np.array(indices), values=arr)


def write_channel(series: ChannelSeries, path: str) -> None:
    """Serialize a channel; finite decimals survive round-trips to 12 digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"] + [f"cmd_{k}" for k in range(series.dims - 1)])
        for idx, row in zip(series.indices, series.values):
            writer.writerow([int(idx)] + [format(v, f".{FLOAT_DIGITS}g") for v in row])


def load_labels(path: str) -> LabelSet:
    rows = _open_rows(path)
    try:
        header = next(rows)
    except StopIteration:
        raise RaggedRowError(f"{path}: empty file") from None
    expected = ["channel_id", "start", "end", "class", "t_a"]
    if header[: len(expected)] != expected:
        raise RaggedRowError(f"{path}: header must start with {','.join(expected)}")
    has_tag = len(header) > len(expected) and header[len(expected)] == "tag"
    entries = []
    for rownum, row in enumerate(rows, start=2):
        if len(row) < len(expected):
            raise RaggedRowError(f"{path}:{rownum}: expected >= {len(expected)} columns")
        try:
            start, end, t_a = int(row[1]), int(row[2]), int(row[4])
        except ValueError:
            raise InvalidLabelError(f"{path}:{rownum}: non-integer range") from None
        tag = row[len(expected)] if has_tag and len(row) > len(expected) else ""
        entries.append(
            LabelEntry(channel_id=row[0], start=start, end=end, cls=row[3], t_a=t_a, tag=tag)
        )
    return LabelSet(entries=tuple(entries))


def write_labels(labels: LabelSet, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel_id", "start", "end", "class", "t_a", "tag"])
        for e in labels.entries:
            writer.writerow([e.channel_id, e.start, e.end, e.cls, e.t_a, e.tag])


def load_predictions(path: str, channel_id: str | None = None) -> PredictionSeries:
    rows = _open_rows(path)
    try:
        header = next(rows)
    except StopIteration:
        raise RaggedRowError(f"{path}: empty file") from None
    if header[:2] != ["index", "y_hat"]:
        raise RaggedRowError(f"{path}: header must be 'index,y_hat'")
    indices: list[int] = []
    preds: list[float] = []
    for rownum, row in enumerate(rows, start=2):
        if len(row) != 2:
            raise RaggedRowError(f"{path}:{rownum}: expected 2 columns")
        try:
            idx, y = int(row[0]), float(row[1])
        except ValueError:
            raise NonFiniteValueError(f"{path}:{rownum}: unparseable row") from None
        if not math.isfinite(y):
            raise NonFiniteValueError(f"{path}:{rownum}: non-finite y_hat")
        if indices and idx == indices[-1]:
            raise DuplicateIndexError(f"{path}:{rownum}: duplicate index {idx}")
        indices.append(idx)
        preds.append(y)
    if channel_id is None:
        channel_id = os.path.splitext(os.path.basename(path))[0]
    return PredictionSeries(channel_id=channel_id, indices=np.array(indices, dtype=np.int64),
                            y_hat=np.array(preds, dtype=np.float64))


def write_predictions(predictions: PredictionSeries, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y_hat"])
        for idx, y in zip(predictions.indices, predictions.y_hat):
            writer.writerow([int(idx), format(y, f".{FLOAT_DIGITS}g")])
