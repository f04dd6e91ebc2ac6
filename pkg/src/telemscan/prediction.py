"""One-step-ahead predictors, prediction errors, and EWMA smoothing.

The engine consumes predictions from three sources: a trivial persistence
baseline, a least-squares autoregressive baseline, or a prediction file
produced by an external model. All operations here are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentGapError, DegenerateFitError, InsufficientHistoryError
from .model import ChannelSeries, PredictionSeries

# Ridge fallback strength for rank-deficient AR design matrices.
RIDGE_LAMBDA = 1e-8


@dataclass(frozen=True)
class PredictorConfig:
    """Framing of the one-step prediction task.

    Prediction length and output dimension are fixed at 1 in this engine;
    only the input sequence length is tunable.
    """

    sequence_length: int = 250
    prediction_length: int = 1
    output_dims: int = 1

    def __post_init__(self):
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be >= 1")
        if self.prediction_length != 1 or self.output_dims != 1:
            raise ValueError("this engine supports prediction_length == output_dims == 1")


@dataclass(frozen=True)
class ErrorSeries:
    """Absolute one-step prediction errors, indexed by target step."""

    channel_id: str
    indices: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "errors", np.asarray(self.errors, dtype=np.float64))
        if len(self.indices) != len(self.errors):
            raise ValueError("indices and errors length mismatch")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ValueError("error indices must be strictly increasing")
        if np.any(self.errors < 0) or not np.all(np.isfinite(self.errors)):
            raise ValueError("errors must be finite and non-negative")
        self.indices.setflags(write=False)
        self.errors.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SmoothedErrorWindow:
    """A slice of the smoothed error stream under evaluation.

    Holds up to ``history_len`` prior values plus the current batch; indices
    are the original stream step indices.
    """

    history_len: int
    smoothing_span: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ARModel:
    """Least-squares autoregressive baseline standing in for the LSTM."""

    order: int
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=np.float64)
        )
        if len(self.coefficients) != self.order:
            raise ValueError("coefficient count must equal order")


def predict_persistence(series: ChannelSeries, t: int) -> float:
    """Predict the value at step t as the value at step t-1."""
    if t < 1:
        raise InsufficientHistoryError("persistence prediction requires t >= 1")
    pos = series.position_of(t - 1)
    return float(series.telemetry[pos])


def fit_ar(train: ChannelSeries, order: int) -> ARModel:
    """Least-squares fit of the telemetry value on its previous `order` values.

    Rank-deficient designs (constant channels, repeated lags) fall back to a
    ridge solve so degenerate inputs still yield a usable model.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    y = train.telemetry
    n = len(y)
    if n <= order + 1:
        raise InsufficientHistoryError(
            f"AR({order}) fit needs more than {order + 1} training values, got {n}"
        )
    # Design row for target y[t]: [1, y[t-1], y[t-2], ..., y[t-order]].
    targets = y[order:]
    cols = [np.ones(n - order)]
    for lag in range(1, order + 1):
        cols.append(y[order - lag : n - lag])
    design = np.column_stack(cols)
    solution, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank < design.shape[1]:
        gram = design.T @ design + RIDGE_LAMBDA * np.eye(design.shape[1])
        try:
            solution = np.linalg.solve(gram, design.T @ targets)
        except np.linalg.LinAlgError as exc:
            raise DegenerateFitError(f"AR fit failed even with ridge fallback: {exc}") from None
    return ARModel(order=order, coefficients=solution[1:], intercept=float(solution[0]))


def predict_ar(model: ARModel, window) -> float:
    """Predict from the most-recent-first lag window.

    window[0] is the value one step back, window[1] two steps back, etc.
    """
    window = np.asarray(window, dtype=np.float64)
    if len(window) != model.order:
        raise ValueError(f"window length {len(window)} != model order {model.order}")
    return float(model.intercept + model.coefficients @ window)


def generate_predictions(series: ChannelSeries, predictor: str,
                         ar_order: int = 3, ar_train_len: int = 0) -> PredictionSeries:
    """Run a baseline predictor over a channel, producing one-step predictions.

    ``ar_train_len`` limits the AR fit to the first N steps (0 = full series).
    Channels with gapped step indices are not supported by the baselines.
    """
    idx = series.indices
    if len(idx) > 1 and not np.all(np.diff(idx) == 1):
        raise AlignmentGapError(
            f"channel {series.channel_id}: baseline predictors need contiguous steps"
        )
    y = series.telemetry
    if predictor == "persistence":
        return PredictionSeries(channel_id=series.channel_id, indices=idx[1:], y_hat=y[:-1])
    if predictor == "ar":
        train = series
        if ar_train_len and ar_train_len < len(series):
            train = ChannelSeries(
                channel_id=series.channel_id,
                indices=idx[:ar_train_len],
                values=series.values[:ar_train_len],
            )
        model = fit_ar(train, ar_order)
        if model.order == 0:
            preds = np.full(len(y), model.intercept)
            return PredictionSeries(channel_id=series.channel_id, indices=idx, y_hat=preds)
        lags = np.column_stack(
            [y[model.order - lag : len(y) - lag] for lag in range(1, model.order + 1)]
        )
        preds = model.intercept + lags @ model.coefficients
        return PredictionSeries(
            channel_id=series.channel_id, indices=idx[model.order :], y_hat=preds
        )
    raise ValueError(f"unknown predictor {predictor!r}")


def compute_errors(actuals: ChannelSeries, predictions: PredictionSeries) -> ErrorSeries:
    """Absolute error |y(t) - y_hat(t)| for every prediction index t.

    A prediction stored at index t targets the actual dimension-0 value at
    step t; errors depend only on dimension 0.
    """
    positions = np.searchsorted(actuals.indices, predictions.indices)
    valid = (positions < len(actuals.indices)) & (
        actuals.indices[np.minimum(positions, len(actuals.indices) - 1)]
        == predictions.indices
    )
    if not np.all(valid):
        missing = predictions.indices[~valid]
        raise AlignmentGapError(
            f"channel {predictions.channel_id}: no actual value for prediction "
            f"indices {missing[:5].tolist()}{'...' if len(missing) > 5 else ''}"
        )
    e = np.abs(actuals.telemetry[positions] - predictions.y_hat)
    return ErrorSeries(channel_id=predictions.channel_id,
                       indices=predictions.indices, errors=e)


def ewma_smooth(errors: np.ndarray, span: int) -> np.ndarray:
    """Exponentially weighted moving average with alpha = 2 / (span + 1).

    e_s[0] = e[0]; e_s[t] = alpha * e[t] + (1 - alpha) * e_s[t-1]. Empty
    input yields empty output; span = 1 is the identity.
    """
    if span < 1:
        raise ValueError("span must be >= 1")
    e = np.asarray(errors, dtype=np.float64)
    if len(e) == 0:
        return np.zeros(0)
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(e)
    acc = e[0]
    out[0] = acc
    for i in range(1, len(e)):
        acc = alpha * e[i] + (1.0 - alpha) * acc
        out[i] = acc
    return out


def smooth_error_series(errors: ErrorSeries, span: int) -> np.ndarray:
    """Smoothed values aligned with ``errors.indices``."""
    return ewma_smooth(errors.errors, span)
