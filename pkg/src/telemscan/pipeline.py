"""Per-channel batch orchestration and result persistence.

Channels are independent units of work and run concurrently (capped by the
TELEMSCAN_THREADS environment variable); within a channel, batches are
strictly sequential. Results are line-delimited JSON with deterministic
field order, so identical inputs and config produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig, config_hash
from .errors import MissingFileError, TelemscanError
from .gaussian import GaussianWindowState, detect_gaussian_tail
from .model import ChannelSeries, LabelSet, PredictionSeries, load_channel, load_predictions
from .prediction import (
    ErrorSeries,
    SmoothedErrorWindow,
    compute_errors,
    ewma_smooth,
    generate_predictions,
)
from .pruning import ChannelPolicy, apply_smin, build_emax, build_emax_from_mask, \
    learn_smin, prune_sequences
from .thresholding import AnomalySequence, SequenceStatus, ZGrid, select_threshold, \
    sequences_from_decision

STEPS_PER_DAY = 1440  # 1-minute aggregation windows


@dataclass
class BatchDiagnostic:
    batch: int
    start: int
    end: int
    warm_up: bool = False
    degenerate: bool = False
    epsilon: float | None = None
    z: float | None = None
    objective: float | None = None
    n_anomalous: int = 0


@dataclass
class ChannelResult:
    channel_id: str
    method: str
    config_hash: str
    sequences: list[AnomalySequence] = field(default_factory=list)
    diagnostics: list[BatchDiagnostic] = field(default_factory=list)

    def confirmed(self) -> list[AnomalySequence]:
        return [s for s in self.sequences if s.status is SequenceStatus.CONFIRMED]


@dataclass(frozen=True)
class EvalWindowSpec:
    """Day spans around each labeled anomaly's primary time."""

    span_before_days: int = 3
    span_after_days: int = 2
    train_before_days: int = 2


@dataclass(frozen=True)
class EvalWindow:
    channel_id: str
    eval_range: tuple[int, int]
    train_range: tuple[int, int]
    shortfall: bool = False


def expand_and_merge(ranges: list[tuple[int, int]], buffer: int,
                     bounds: tuple[int, int] | None = None) -> list[tuple[int, int]]:
    """Widen each range by the buffer, clamp to bounds, and merge runs that
    overlap or touch."""
    if buffer < 0:
        raise ValueError("buffer must be >= 0")
    widened = []
    for lo, hi in sorted(ranges):
        lo, hi = lo - buffer, hi + buffer
        if bounds is not None:
            lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
        widened.append((lo, hi))
    merged: list[list[int]] = []
    for lo, hi in widened:
        if merged and lo <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def make_eval_windows(labels: LabelSet, spec: EvalWindowSpec = EvalWindowSpec(),
                      step_minutes: int = 1,
                      channel_lengths: dict[str, int] | None = None) -> list[EvalWindow]:
    """Evaluation and training step ranges around each primary anomaly time.

    Ranges are clamped to available data (step 0, and the channel length
    when known) with a shortfall flag.
    """
    steps_per_day = STEPS_PER_DAY // step_minutes
    out = []
    for entry in labels.entries:
        t_s = entry.t_a - spec.span_before_days * steps_per_day
        t_f = entry.t_a + spec.span_after_days * steps_per_day
        train_lo = t_s - spec.train_before_days * steps_per_day
        train_hi = t_s
        limit = None
        if channel_lengths and entry.channel_id in channel_lengths:
            limit = channel_lengths[entry.channel_id] - 1
        shortfall = train_lo < 0 or t_s < 0 or (limit is not None and t_f > limit)
        clamp = lambda v: max(0, v) if limit is None else min(max(0, v), limit)
        out.append(
            EvalWindow(
                channel_id=entry.channel_id,
                eval_range=(clamp(t_s), clamp(t_f)),
                train_range=(clamp(train_lo), clamp(train_hi)),
                shortfall=shortfall,
            )
        )
    return out


def _resolve_predictions(series: ChannelSeries, predictions: PredictionSeries | None,
                         config: PipelineConfig) -> PredictionSeries:
    if predictions is not None:
        return predictions
    if config.predictor == "file":
        raise MissingFileError(
            f"channel {series.channel_id}: predictor 'file' requires a prediction file"
        )
    return generate_predictions(series, config.predictor,
                                ar_order=config.ar_order,
                                ar_train_len=config.ar_train_len)


def run_channel(series: ChannelSeries, predictions: PredictionSeries | None,
                config: PipelineConfig,
                policy: ChannelPolicy | None = None) -> ChannelResult:
    """Batch-evaluate one channel with the configured detector.

    Errors are smoothed once over the whole stream (the EWMA is a stream
    statistic; its initialization transient dies off well inside the h
    window). Each batch is evaluated on up to h prior smoothed values plus
    the batch, detections are retained when they intersect the batch and
    peak inside it (so a sequence spanning a boundary is reported once),
    then pruning and any s_min policy are applied.
    """
    predictions = _resolve_predictions(series, predictions, config)
    errors = compute_errors(series, predictions)
    smoothed = ewma_smooth(errors.errors, config.effective_span)
    grid = ZGrid.from_range(config.z_min, config.z_max, config.z_step)
    chash = config_hash(config)
    result = ChannelResult(channel_id=series.channel_id, method=config.method,
                           config_hash=chash)
    n = len(errors)
    retained_all: list[AnomalySequence] = []
    evaluated_batches = 0
    confirmed_count = 0
    for batch_num, b in enumerate(range(0, n, config.batch_size)):
        batch_end = min(b + config.batch_size, n)
        batch_lo = int(errors.indices[b])
        batch_hi = int(errors.indices[batch_end - 1])
        diag = BatchDiagnostic(batch=batch_num, start=batch_lo, end=batch_hi)
        if b < config.warmup_min:
            diag.warm_up = True
            result.diagnostics.append(diag)
            continue
        hist_start = max(0, b - config.h)
        window = SmoothedErrorWindow(
            history_len=config.h,
            smoothing_span=config.effective_span,
            indices=errors.indices[hist_start:batch_end],
            values=smoothed[hist_start:batch_end],
        )
        if config.method == "nonparametric":
            decision = select_threshold(window, grid)
            if decision is None:
                diag.degenerate = bool(np.std(window.values) == 0.0)
                result.diagnostics.append(diag)
                evaluated_batches += 1
                continue
            diag.epsilon = decision.epsilon
            diag.z = decision.z
            diag.objective = decision.objective
            diag.n_anomalous = len(decision.anomalous)
            sequences = sequences_from_decision(window, decision, series.channel_id)
            retained = [s for s in sequences
                        if s.intersects(batch_lo, batch_hi) and s.peak_index >= batch_lo]
            prune_input = build_emax(retained, window, decision.epsilon, p=config.p)
        else:
            raw = errors.errors[hist_start:batch_end]
            state = GaussianWindowState(
                window_len=config.effective_l_w,
                short_len=config.l_short,
                epsilon_norm=config.epsilon_norm,
                denominator=config.denominator,
            )
            sequences, mask = detect_gaussian_tail(window.indices, raw, state,
                                                   channel_id=series.channel_id)
            diag.n_anomalous = int(np.count_nonzero(mask))
            retained = [s for s in sequences
                        if s.intersects(batch_lo, batch_hi) and s.peak_index >= batch_lo]
            prune_input = build_emax_from_mask(retained, raw, mask, p=config.p)
        prune_sequences(prune_input, retained)
        rate = confirmed_count / max(1, evaluated_batches)
        if policy is not None and policy.s_min is not None \
                and rate > policy.anomaly_rate_threshold:
            apply_smin(retained, policy)
        confirmed_count += sum(
            1 for s in retained if s.status is SequenceStatus.CONFIRMED
        )
        evaluated_batches += 1
        retained_all.extend(retained)
        result.diagnostics.append(diag)

    result.sequences = _assemble_sequences(retained_all, errors, config)
    return result


def _assemble_sequences(retained: list[AnomalySequence], errors: ErrorSeries,
                        config: PipelineConfig) -> list[AnomalySequence]:
    """Merge confirmed detections into disjoint expanded regions; keep pruned
    detections untouched for inspection."""
    if len(errors) == 0:
        return []
    bounds = (int(errors.indices[0]), int(errors.indices[-1]))
    confirmed = [s for s in retained if s.status is SequenceStatus.CONFIRMED]
    pruned = [s for s in retained if s.status is not SequenceStatus.CONFIRMED]
    merged_ranges = expand_and_merge([(s.start, s.end) for s in confirmed],
                                     config.expansion_buffer, bounds=bounds)
    merged: list[AnomalySequence] = []
    for lo, hi in merged_ranges:
        members = [s for s in confirmed if s.intersects(lo, hi)]
        top = max(members, key=lambda s: s.peak_value)
        merged.append(
            AnomalySequence(
                channel_id=top.channel_id,
                start=lo,
                end=hi,
                peak_index=top.peak_index,
                peak_value=top.peak_value,
                score=max(s.score for s in members),
                status=SequenceStatus.CONFIRMED,
            )
        )
    # Drop pruned duplicates of regions that were confirmed in another batch.
    survivors = [s for s in pruned
                 if not any(s.intersects(lo, hi) for lo, hi in merged_ranges)]
    deduped: dict[tuple[int, int], AnomalySequence] = {}
    for s in survivors:
        key = (s.start, s.end)
        if key not in deduped or s.peak_value > deduped[key].peak_value:
            deduped[key] = s
    out = merged + list(deduped.values())
    out.sort(key=lambda s: (s.start, s.end))
    return out


def _sequence_payload(seq: AnomalySequence) -> dict:
    return {
        "start": seq.start,
        "end": seq.end,
        "peak_index": seq.peak_index,
        "peak_value": seq.peak_value,
        "score": seq.score,
        "status": seq.status.value,
    }


def _diagnostic_payload(diag: BatchDiagnostic) -> dict:
    return {
        "batch": diag.batch,
        "start": diag.start,
        "end": diag.end,
        "warm_up": diag.warm_up,
        "degenerate": diag.degenerate,
        "epsilon": diag.epsilon,
        "z": diag.z,
        "objective": diag.objective,
        "n_anomalous": diag.n_anomalous,
    }


def persist_results(results: list[ChannelResult], path: str, method: str,
                    chash: str) -> None:
    """Write the results file: a header record then one record per channel,
    sorted by channel id, with deterministic field order."""
    records = [
        {
            "record_type": "header",
            "format_version": 1,
            "method": method,
            "config_hash": chash,
            "channels": len(results),
        }
    ]
    for result in sorted(results, key=lambda r: r.channel_id):
        records.append(
            {
                "record_type": "channel",
                "channel_id": result.channel_id,
                "method": result.method,
                "config_hash": result.config_hash,
                "sequences": [_sequence_payload(s) for s in result.sequences],
                "diagnostics": [_diagnostic_payload(d) for d in result.diagnostics],
            }
        )
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise TelemscanError(f"cannot write results to {path}: {exc}") from None


def load_results(path: str) -> tuple[dict, list[dict]]:
    """Read a results file back as (header, channel records)."""
    if not os.path.isfile(path):
        raise MissingFileError(f"no such results file: {path}")
    header: dict | None = None
    channels: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("record_type") == "header":
                header = record
            elif record.get("record_type") == "channel":
                channels.append(record)
    if header is None:
        raise TelemscanError(f"{path}: missing header record")
    return header, channels


def confirmed_ranges(channels: list[dict]) -> dict[str, list[tuple[int, int]]]:
    """Per-channel confirmed sequence ranges from loaded channel records."""
    out: dict[str, list[tuple[int, int]]] = {}
    for record in channels:
        ranges = [
            (int(s["start"]), int(s["end"]))
            for s in record.get("sequences", [])
            if s.get("status") == "confirmed"
        ]
        out[record["channel_id"]] = sorted(ranges)
    return out


def _load_feedback(path: str) -> dict[str, list[tuple[float, str]]]:
    """Feedback CSV -> per-channel (score, label) history, last write wins
    per sequence."""
    import csv

    if not os.path.isfile(path):
        raise MissingFileError(f"no such feedback file: {path}")
    latest: dict[tuple[str, int, int], tuple[float, str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["channel_id", "sequence_start", "sequence_end", "score", "label"]:
            raise TelemscanError(f"{path}: unexpected feedback header {header}")
        for row in reader:
            if len(row) != 5:
                continue
            key = (row[0], int(row[1]), int(row[2]))
            latest[key] = (float(row[3]), row[4])
    history: dict[str, list[tuple[float, str]]] = {}
    for (cid, _, _), entry in latest.items():
        history.setdefault(cid, []).append(entry)
    return history


def channel_policies(config: PipelineConfig) -> dict[str, ChannelPolicy]:
    if config.smin_policy == "none" or not config.smin_feedback:
        return {}
    history = _load_feedback(config.smin_feedback)
    return {
        cid: learn_smin(entries, policy=config.smin_policy,
                        quantile=config.smin_quantile, channel_id=cid,
                        anomaly_rate_threshold=config.anomaly_rate_threshold)
        for cid, entries in history.items()
    }


def _worker_count() -> int:
    cap = os.environ.get("TELEMSCAN_THREADS", "")
    try:
        value = int(cap)
    except ValueError:
        value = 0
    if value > 0:
        return value
    return min(8, os.cpu_count() or 1)


def run_detection(data_dir: str, config: PipelineConfig, out_path: str,
                  predictions_dir: str | None = None) -> dict:
    """Run every channel under the data root and persist results.

    Returns a report dict with processed channel ids and per-channel aborts;
    aggregation tolerates out-of-order completion because records are sorted
    before writing.
    """
    if not os.path.isdir(data_dir):
        raise MissingFileError(f"no such data directory: {data_dir}")
    channel_files = sorted(
        f for f in os.listdir(data_dir) if f.endswith(".csv")
    )
    if not channel_files:
        raise MissingFileError(f"no channel CSVs under {data_dir}")
    policies = channel_policies(config)

    def process(filename: str):
        cid = os.path.splitext(filename)[0]
        series = load_channel(os.path.join(data_dir, filename))
        predictions = None
        if predictions_dir is not None:
            pred_path = os.path.join(predictions_dir, filename)
            if os.path.isfile(pred_path):
                predictions = load_predictions(pred_path, channel_id=cid)
            elif config.predictor == "file":
                raise MissingFileError(f"no prediction file for channel {cid}")
        return run_channel(series, predictions, config, policy=policies.get(cid))

    results: list[ChannelResult] = []
    aborted: list[dict] = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = {pool.submit(process, f): f for f in channel_files}
        for future, filename in futures.items():
            cid = os.path.splitext(filename)[0]
            try:
                results.append(future.result())
            except TelemscanError as exc:
                aborted.append({"channel_id": cid, "code": exc.code,
                                "message": exc.message})
    chash = config_hash(config)
    persist_results(results, out_path, method=config.method, chash=chash)
    return {
        "channels": sorted(r.channel_id for r in results),
        "aborted": sorted(aborted, key=lambda a: a["channel_id"]),
        "config_hash": chash,
        "out_path": out_path,
    }
