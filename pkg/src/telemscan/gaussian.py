"""Parametric Gaussian-tail error evaluation and the normality diagnostic.

The comparison method models a rolling window of raw prediction errors as a
normal distribution and flags steps whose short-term mean lands far in the
upper tail: L = 1 - Q((mu_s - mu_W) / sigma^2_W) with Q the standard normal
upper-tail probability. The division by the variance (not the standard
deviation) is deliberate; a config switch selects the stddev variant.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSampleError, DegenerateWindowError, SampleTooSmallError
from .thresholding import AnomalySequence, SequenceStatus, contiguous_runs

DENOMINATOR_VARIANCE = "variance"
DENOMINATOR_STDDEV = "stddev"

# Windows whose spread is indistinguishable from summation roundoff are
# degenerate: near-constant streams otherwise divide two noise terms and
# produce arbitrary likelihoods.
VARIANCE_FLOOR_REL = 1e-12


def variance_is_degenerate(mean: float, variance: float) -> bool:
    return variance <= (VARIANCE_FLOOR_REL * max(1.0, abs(mean))) ** 2


@dataclass
class GaussianWindowState:
    """Rolling window of raw errors with its normal-model statistics.

    Single-owner mutable state for one channel stream; statistics are
    recomputed from the window contents at every update, which is cheap at
    these window lengths and immune to incremental drift.
    """

    window_len: int = 2100
    short_len: int = 10
    epsilon_norm: float = 0.01
    denominator: str = DENOMINATOR_VARIANCE
    window: deque = field(default_factory=deque)
    mean: float = 0.0
    variance: float = 0.0
    short_mean: float = 0.0

    def __post_init__(self):
        if self.window_len < 1 or self.short_len < 1:
            raise ValueError("window lengths must be positive")
        if not 0.0 < self.epsilon_norm < 1.0:
            raise ValueError("epsilon_norm must lie in (0, 1)")
        if self.denominator not in (DENOMINATOR_VARIANCE, DENOMINATOR_STDDEV):
            raise ValueError(f"unknown denominator {self.denominator!r}")
        self.window = deque(self.window, maxlen=self.window_len)


def normal_tail(u: float) -> float:
    """Standard normal upper-tail probability Q(u) via the complementary
    error function."""
    return 0.5 * math.erfc(u / math.sqrt(2.0))


def update_window(state: GaussianWindowState, e: float) -> GaussianWindowState:
    """Insert a new raw error, evicting beyond capacity, and refresh the
    population statistics."""
    if not math.isfinite(e) or e < 0:
        raise ValueError("errors must be finite and non-negative")
    state.window.append(float(e))
    arr = np.array(state.window)
    state.mean = float(np.mean(arr))
    state.variance = float(np.var(arr))
    state.short_mean = float(np.mean(arr[-state.short_len:]))
    return state


def anomaly_likelihood(state: GaussianWindowState) -> float:
    """L = 1 - Q(u) where u = (short mean - window mean) / window variance."""
    if variance_is_degenerate(state.mean, state.variance):
        raise DegenerateWindowError("window variance is zero")
    denom = state.variance
    if state.denominator == DENOMINATOR_STDDEV:
        denom = math.sqrt(state.variance)
    u = (state.short_mean - state.mean) / denom
    return 1.0 - normal_tail(u)


def detect_gaussian_tail(indices: np.ndarray, errors: np.ndarray,
                         state: GaussianWindowState,
                         channel_id: str = "") -> tuple[list[AnomalySequence], np.ndarray]:
    """Stream raw errors through the rolling window and flag tail steps.

    A step is flagged when L >= 1 - epsilon_norm; degenerate-variance steps
    are never flagged. Contiguous flagged steps merge into sequences scored
    with the severity formula, bridging epsilon to the error value at each
    sequence's first flagged step so pruning can treat both detectors alike.

    Returns the scored sequences and the per-step flag mask.
    """
    indices = np.asarray(indices, dtype=np.int64)
    errors = np.asarray(errors, dtype=np.float64)
    if len(indices) != len(errors):
        raise ValueError("indices and errors length mismatch")
    if len(errors) == 0:
        raise ValueError("error stream is empty")
    flagged = np.zeros(len(errors), dtype=bool)
    for i, e in enumerate(errors):
        update_window(state, float(e))
        try:
            likelihood = anomaly_likelihood(state)
        except DegenerateWindowError:
            continue
        flagged[i] = likelihood >= 1.0 - state.epsilon_norm
    mean = float(np.mean(errors))
    sd = float(np.std(errors))
    scale = mean + sd
    sequences = []
    for lo, hi in contiguous_runs(indices[flagged]):
        mask = (indices >= lo) & (indices <= hi)
        vals = errors[mask]
        idxs = indices[mask]
        peak_pos = int(np.argmax(vals))
        bridge_epsilon = float(vals[0])
        score = 0.0
        if scale > 0.0:
            score = (float(vals[peak_pos]) - bridge_epsilon) / scale
        sequences.append(
            AnomalySequence(
                channel_id=channel_id,
                start=lo,
                end=hi,
                peak_index=int(idxs[peak_pos]),
                peak_value=float(vals[peak_pos]),
                score=score,
                status=SequenceStatus.CANDIDATE,
            )
        )
    return sequences, flagged


def dagostino_pearson(sample) -> dict:
    """D'Agostino-Pearson omnibus normality test.

    Combines the transformed skewness statistic (D'Agostino 1970) and the
    transformed kurtosis statistic (Anscombe & Glynn 1983) into
    K^2 = Z1^2 + Z2^2, chi-square with 2 degrees of freedom under the null,
    so the p-value is exp(-K^2 / 2).
    """
    x = np.asarray(sample, dtype=np.float64)
    n = len(x)
    if n < 20:
        raise SampleTooSmallError(f"need at least 20 observations, got {n}")
    mu = np.mean(x)
    centered = x - mu
    m2 = np.mean(centered**2)
    if m2 == 0.0:
        raise DegenerateSampleError("sample variance is zero")
    m3 = np.mean(centered**3)
    m4 = np.mean(centered**4)

    # Skewness transform.
    b1 = m3 / m2**1.5
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = (
        3.0 * (n**2 + 27 * n - 70) * (n + 1) * (n + 3)
        / ((n - 2) * (n + 5) * (n + 7) * (n + 9))
    )
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    z1 = delta * math.asinh(y / alpha)

    # Kurtosis transform.
    b2 = m4 / m2**2
    e_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
    xx = (b2 - e_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0 * (n**2 - 5 * n + 2) / ((n + 7) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2))
    term = (1.0 - 2.0 / a) / (1.0 + xx * math.sqrt(2.0 / (a - 4.0)))
    z2 = ((1.0 - 2.0 / (9.0 * a)) - math.copysign(abs(term) ** (1.0 / 3.0), term)) / math.sqrt(
        2.0 / (9.0 * a)
    )

    k2 = z1**2 + z2**2
    return {"k2": k2, "p_value": math.exp(-k2 / 2.0)}
