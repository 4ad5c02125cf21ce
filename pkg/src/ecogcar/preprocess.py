"""Window extraction around movement onset and framewise band power.

Band limiting works by discrete-spectrum masking: the frame is transformed,
bins outside the band are zeroed, and the power is the mean square of the
inverse transform. This is deterministic and zero-phase, at the cost of the
usual rectangular-window leakage (tolerances downstream budget for it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Trial


@dataclass(frozen=True)
class WindowSpec:
    """A time window in seconds relative to movement onset (negative = before)."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not self.start_s < self.end_s:
            raise ValueError(f"window start {self.start_s} must be < end {self.end_s}")

    def length_samples(self, sampling_rate: float) -> int:
        return round((self.end_s - self.start_s) * sampling_rate)

    def sample_range(self, onset_index: int, sampling_rate: float) -> tuple[int, int]:
        lo = onset_index + round(self.start_s * sampling_rate)
        return lo, lo + self.length_samples(sampling_rate)


@dataclass
class Epoch:
    """A windowed copy of one trial's samples, (channels x window_length)."""

    samples: np.ndarray
    trial_id: str
    window: WindowSpec
    sampling_rate: float

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sampling_rate


@dataclass(frozen=True)
class FrequencyBand:
    low_hz: float
    high_hz: float

    def __post_init__(self) -> None:
        if not 0 <= self.low_hz < self.high_hz:
            raise ValueError(f"invalid band [{self.low_hz}, {self.high_hz}] Hz")

    def validate_for(self, sampling_rate: float) -> None:
        if self.high_hz > sampling_rate / 2:
            raise ValueError(
                f"band [{self.low_hz}, {self.high_hz}] Hz exceeds Nyquist "
                f"({sampling_rate / 2} Hz)"
            )


#: Default analysis bands. Gamma is included because high-frequency cortical
#: activity discriminates movement well in subdural recordings.
MU_BAND = FrequencyBand(8.0, 12.0)
BETA_BAND = FrequencyBand(16.0, 24.0)
GAMMA_BAND = FrequencyBand(75.0, 100.0)
DEFAULT_BANDS = (MU_BAND, BETA_BAND, GAMMA_BAND)


@dataclass
class BandPowerSeries:
    """Per-channel, per-frame mean-square band power (microvolts squared)."""

    values: np.ndarray  # (channels, frames), >= 0
    frame_hop_s: float
    band: FrequencyBand

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def extract_window(trial: Trial, window: WindowSpec, sampling_rate: float) -> Epoch:
    """Copy the onset-relative window out of a trial.

    Raises if the resolved sample range leaves the trial, naming the trial
    and the violated bound.
    """
    lo, hi = window.sample_range(trial.onset_index, sampling_rate)
    n = trial.n_samples
    if lo < 0:
        raise ValueError(
            f"trial {trial.trial_id!r}: window [{window.start_s}, {window.end_s}) "
            f"starts at sample {lo}, before the trial start"
        )
    if hi > n:
        raise ValueError(
            f"trial {trial.trial_id!r}: window [{window.start_s}, {window.end_s}) "
            f"ends at sample {hi}, past the trial end ({n})"
        )
    return Epoch(
        samples=trial.samples[:, lo:hi].copy(),
        trial_id=trial.trial_id,
        window=window,
        sampling_rate=sampling_rate,
    )


def band_power(
    epoch: Epoch, band: FrequencyBand, frame_s: float, hop_s: float
) -> BandPowerSeries:
    """Framewise band-limited mean-square power of an epoch.

    Frames are rectangular segments of ``frame_s`` seconds advanced by
    ``hop_s``; frames that would overrun the epoch are dropped. Within each
    frame the signal is band-limited by zeroing all spectrum bins outside
    [low_hz, high_hz] and inverse-transforming, then the power is the mean
    of squares.
    """
    band.validate_for(epoch.sampling_rate)
    frame_len = round(frame_s * epoch.sampling_rate)
    hop = round(hop_s * epoch.sampling_rate)
    if frame_len < 1 or hop < 1:
        raise ValueError(f"frame_s {frame_s} / hop_s {hop_s} resolve below one sample")
    if frame_len > epoch.n_samples:
        raise ValueError(
            f"frame of {frame_len} samples is longer than epoch "
            f"({epoch.n_samples} samples)"
        )

    freqs = np.fft.rfftfreq(frame_len, d=1.0 / epoch.sampling_rate)
    keep = (freqs >= band.low_hz) & (freqs <= band.high_hz)
    if not keep.any():
        raise ValueError(
            f"band [{band.low_hz}, {band.high_hz}] Hz maps to no spectrum bins "
            f"for a {frame_len}-sample frame at {epoch.sampling_rate} Hz"
        )

    n_frames = (epoch.n_samples - frame_len) // hop + 1
    starts = np.arange(n_frames) * hop
    # (channels, frames, frame_len) view without copying
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    frames = epoch.samples[:, idx]

    spectrum = np.fft.rfft(frames, axis=-1)
    spectrum[..., ~keep] = 0.0
    limited = np.fft.irfft(spectrum, n=frame_len, axis=-1)
    values = np.mean(limited**2, axis=-1)
    return BandPowerSeries(values=values, frame_hop_s=hop_s, band=band)


def reference_power(series: BandPowerSeries, ref_frames: tuple[int, int]) -> np.ndarray:
    """Per-channel mean power over the frame index range [start, stop)."""
    start, stop = ref_frames
    if not 0 <= start < stop <= series.n_frames:
        raise ValueError(
            f"reference frame range [{start}, {stop}) invalid for a series "
            f"of {series.n_frames} frames"
        )
    return series.values[:, start:stop].mean(axis=1)
