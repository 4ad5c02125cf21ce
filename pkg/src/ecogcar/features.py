"""Per-trial feature assembly: movement-locked average waveforms, band-power
percent-change curves, and the combined normalized feature vector.

Percent change is computed against a within-trial reference interval (the
first second of the recording by default) so every feature works on a single
trial; averaged waveforms across trials are kept for reporting and for
synthetic-data checks. The percent-change block and the downsampled waveform
block live on very different numeric scales, so fitted feature specs z-score
each feature using statistics learned from training data.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, Trial
from .preprocess import (
    DEFAULT_BANDS,
    BandPowerSeries,
    Epoch,
    FrequencyBand,
    WindowSpec,
    band_power,
    extract_window,
    reference_power,
)


@dataclass
class ErpWaveform:
    """Pointwise mean of onset-locked windows across trials (microvolts)."""

    values: np.ndarray  # (channels, window_length)
    window: WindowSpec
    n_trials_averaged: int


@dataclass
class ErdErsCurve:
    """Band power per frame as percent change versus the reference interval.

    Negative values are desynchronization (power drop), positive values
    synchronization; the floor is -100 for nonnegative powers.
    """

    percent: np.ndarray  # (channels, frames)
    band: FrequencyBand
    frame_hop_s: float


@dataclass
class FeatureSpec:
    """Everything needed to turn a trial into a fixed-length feature vector.

    ``analysis_window`` is onset-relative; the reference interval is an
    absolute span from the start of the trial, safely before any pre-onset
    activity at the default onset time. ``norm_mean``/``norm_std`` are
    learned by :func:`fit_feature_spec`; until then vectors come out raw.
    """

    bands: tuple[FrequencyBand, ...] = DEFAULT_BANDS
    analysis_window: WindowSpec = field(default_factory=lambda: WindowSpec(-1.5, 0.0))
    reference_start_s: float = 0.0
    reference_end_s: float = 1.0
    # 4 coarse waveform blocks per channel at the default window/rate: enough
    # to see ramp polarity without drowning the vector in noise dimensions.
    erp_downsample_factor: int = 225
    frame_s: float = 0.25
    hop_s: float = 0.125
    sampling_rate: float | None = None
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.erp_downsample_factor < 1:
            raise ValueError("erp_downsample_factor must be >= 1")
        if not 0 <= self.reference_start_s < self.reference_end_s:
            raise ValueError(
                f"invalid reference interval "
                f"[{self.reference_start_s}, {self.reference_end_s})"
            )
        if self.norm_std is not None and np.any(self.norm_std <= 0):
            raise ValueError("normalization std components must be > 0")

    def require_rate(self) -> float:
        if self.sampling_rate is None:
            raise ValueError(
                "FeatureSpec.sampling_rate is unset; fit the spec or set it explicitly"
            )
        return self.sampling_rate

    def erp_blocks(self) -> int:
        rate = self.require_rate()
        return math.ceil(
            self.analysis_window.length_samples(rate) / self.erp_downsample_factor
        )

    def feature_length(self, n_channels: int) -> int:
        return n_channels * (len(self.bands) + self.erp_blocks())

    def fingerprint(self) -> str:
        payload = {
            "bands": [[b.low_hz, b.high_hz] for b in self.bands],
            "analysis_window": [self.analysis_window.start_s, self.analysis_window.end_s],
            "reference": [self.reference_start_s, self.reference_end_s],
            "erp_downsample_factor": self.erp_downsample_factor,
            "frame_s": self.frame_s,
            "hop_s": self.hop_s,
            "sampling_rate": self.sampling_rate,
            "norm_mean": None if self.norm_mean is None else self.norm_mean.tolist(),
            "norm_std": None if self.norm_std is None else self.norm_std.tolist(),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class FeatureVector:
    values: np.ndarray
    spec_fingerprint: str

    def __len__(self) -> int:
        return self.values.shape[0]


def compute_erp_template(
    trials: list[Trial], window: WindowSpec, sampling_rate: float
) -> ErpWaveform:
    """Average the onset-locked window pointwise across trials."""
    if not trials:
        raise ValueError("cannot average an empty trial list")
    n_ch = trials[0].n_channels
    acc = None
    for t in trials:
        if t.n_channels != n_ch:
            raise ValueError(
                f"trial {t.trial_id!r} has {t.n_channels} channels, expected {n_ch}"
            )
        epoch = extract_window(t, window, sampling_rate)
        acc = epoch.samples if acc is None else acc + epoch.samples
    return ErpWaveform(
        values=acc / len(trials), window=window, n_trials_averaged=len(trials)
    )


def _reference_window(trial: Trial, spec: FeatureSpec) -> WindowSpec:
    """The absolute reference interval re-expressed relative to this trial's onset."""
    rate = spec.require_rate()
    onset_s = trial.onset_index / rate
    return WindowSpec(spec.reference_start_s - onset_s, spec.reference_end_s - onset_s)


def _band_reference(trial: Trial, band: FrequencyBand, spec: FeatureSpec) -> np.ndarray:
    rate = spec.require_rate()
    ref_epoch = extract_window(trial, _reference_window(trial, spec), rate)
    series = band_power(ref_epoch, band, spec.frame_s, spec.hop_s)
    ref = reference_power(series, (0, series.n_frames))
    zero = np.nonzero(ref <= 0)[0]
    if zero.size:
        raise ValueError(
            f"trial {trial.trial_id!r}: zero reference power in band "
            f"[{band.low_hz}, {band.high_hz}] Hz on channel {zero[0]} "
            "(degenerate input)"
        )
    return ref


def compute_erd_ers(trial: Trial, band: FrequencyBand, spec: FeatureSpec) -> ErdErsCurve:
    """Percent band-power change of the analysis window versus the reference.

    percent = 100 * (A - R) / R per channel and frame, where A is the frame
    power inside the analysis window and R the mean power over the reference
    interval for the same band and channel.
    """
    rate = spec.require_rate()
    ref = _band_reference(trial, band, spec)
    epoch = extract_window(trial, spec.analysis_window, rate)
    series = band_power(epoch, band, spec.frame_s, spec.hop_s)
    percent = 100.0 * (series.values - ref[:, None]) / ref[:, None]
    return ErdErsCurve(percent=percent, band=band, frame_hop_s=spec.hop_s)


def _block_average(samples: np.ndarray, factor: int) -> np.ndarray:
    """Mean over consecutive blocks of ``factor`` samples; last block may be short."""
    n = samples.shape[1]
    starts = np.arange(0, n, factor)
    sums = np.add.reduceat(samples, starts, axis=1)
    sizes = np.minimum(starts + factor, n) - starts
    return sums / sizes


def extract_features(trial: Trial, spec: FeatureSpec) -> FeatureVector:
    """Assemble the combined feature vector for one trial.

    Layout: first the per-channel, per-band mean percent change over the
    analysis window (channel-major), then the per-channel block-averaged
    waveform of the same window. The result is z-scored when the spec
    carries fitted normalization.
    """
    rate = spec.require_rate()
    if not np.isfinite(trial.samples).all():
        raise ValueError(f"trial {trial.trial_id!r}: non-finite samples")

    erd = np.empty((trial.n_channels, len(spec.bands)))
    for j, band in enumerate(spec.bands):
        curve = compute_erd_ers(trial, band, spec)
        erd[:, j] = curve.percent.mean(axis=1)

    epoch = extract_window(trial, spec.analysis_window, rate)
    erp = _block_average(epoch.samples, spec.erp_downsample_factor)

    values = np.concatenate([erd.ravel(), erp.ravel()])
    if spec.norm_mean is not None:
        if values.shape != spec.norm_mean.shape:
            raise ValueError(
                f"trial {trial.trial_id!r}: feature length {values.shape[0]} "
                f"does not match fitted spec ({spec.norm_mean.shape[0]})"
            )
        values = (values - spec.norm_mean) / spec.norm_std
    return FeatureVector(values=values, spec_fingerprint=spec.fingerprint())


def fit_feature_spec(train: Dataset, base: FeatureSpec) -> FeatureSpec:
    """Learn per-feature normalization from a training set.

    Returns a copy of ``base`` with mean/std computed over the raw training
    vectors; features with zero variance get std 1 so z-scoring never blows
    up on constants.
    """
    if not train.trials:
        raise ValueError("cannot fit a feature spec on an empty training set")
    spec = base
    if spec.sampling_rate is None:
        spec = replace(spec, sampling_rate=train.sampling_rate)
    raw_spec = replace(spec, norm_mean=None, norm_std=None)
    vectors = np.stack(
        [extract_features(t, raw_spec).values for t in train.trials]
    )
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)
    # "zero variance" up to float round-off of the mean subtraction
    degenerate = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    std[degenerate] = 1.0
    return replace(spec, norm_mean=mean, norm_std=std)
