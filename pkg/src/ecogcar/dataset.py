"""Labeled ECoG trial collections: container types, disk format, synthesis,
half splitting and bootstrap resampling.

A trial is a (channels x time) matrix of cortical potentials in microvolts
with a known movement-onset sample. Real recordings are not available, so
``synthesize_dataset`` produces controllable stand-ins: 1/f background noise,
mu/beta rhythms whose amplitude drops on class-specific channels shortly
before onset, and a slow movement-related ramp on dedicated channels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np


class MovementClass(Enum):
    """The three trained arm movements plus the rejection output."""

    RTR = "RTR"  # reach to the right
    RTL = "RTL"  # reach to the left
    WF = "WF"    # wrist flexion
    OTHER = "OTHER"  # classifier rejection output, never a training label

    def __str__(self) -> str:
        return self.value


#: Classes that may appear as trial labels, in canonical order.
TRAINED_CLASSES = (MovementClass.RTR, MovementClass.RTL, MovementClass.WF)

#: Index of each class in canonical order (used for tie-breaking and reports).
CLASS_ORDER = {cls: i for i, cls in enumerate(TRAINED_CLASSES)}


@dataclass
class Trial:
    """One labeled multichannel recording, time-locked to a movement onset.

    ``samples`` has shape (channels, time) in microvolts. ``onset_index``
    must lie strictly inside the recording. Finiteness of the samples is
    enforced at load/synthesis time and again before feature extraction,
    not here, so that deliberately corrupt trials can be fed to the
    robustness probe.
    """

    trial_id: str
    label: MovementClass
    samples: np.ndarray
    onset_index: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError(
                f"trial {self.trial_id!r}: samples must be 2-D "
                f"(channels x time), got shape {self.samples.shape}"
            )
        if self.samples.shape[0] < 1:
            raise ValueError(f"trial {self.trial_id!r}: needs at least one channel")
        n = self.samples.shape[1]
        if not 0 < self.onset_index < n:
            raise ValueError(
                f"trial {self.trial_id!r}: onset outside trial "
                f"(onset_index {self.onset_index}, trial length {n})"
            )
        if self.label is MovementClass.OTHER:
            raise ValueError(
                f"trial {self.trial_id!r}: OTHER is a classifier output, "
                "not a valid trial label"
            )

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class Dataset:
    """A homogeneous collection of trials sharing rate and channel layout."""

    sampling_rate: float
    channel_names: list[str]
    trials: list[Trial] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.sampling_rate <= 0:
            raise ValueError(f"sampling_rate must be > 0, got {self.sampling_rate}")
        n_ch = len(self.channel_names)
        seen: set[str] = set()
        n_samp = self.trials[0].n_samples if self.trials else None
        for t in self.trials:
            if t.n_channels != n_ch:
                raise ValueError(
                    f"trial {t.trial_id!r}: channel count {t.n_channels} "
                    f"does not match dataset ({n_ch})"
                )
            if t.n_samples != n_samp:
                raise ValueError(
                    f"trial {t.trial_id!r}: length {t.n_samples} does not "
                    f"match dataset ({n_samp})"
                )
            if not np.isfinite(t.samples).all():
                bad = np.argwhere(~np.isfinite(t.samples))[0]
                raise ValueError(
                    f"trial {t.trial_id!r}: non-finite sample at "
                    f"channel {bad[0]}, index {bad[1]}"
                )
            if t.trial_id in seen:
                raise ValueError(f"duplicate trial_id {t.trial_id!r}")
            seen.add(t.trial_id)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_samples(self) -> int:
        if not self.trials:
            raise ValueError("empty dataset has no trial length")
        return self.trials[0].n_samples

    def class_counts(self) -> dict[MovementClass, int]:
        counts = {cls: 0 for cls in TRAINED_CLASSES}
        for t in self.trials:
            counts[t.label] += 1
        return counts

    def by_class(self) -> dict[MovementClass, list[Trial]]:
        groups: dict[MovementClass, list[Trial]] = {cls: [] for cls in TRAINED_CLASSES}
        for t in self.trials:
            groups[t.label].append(t)
        return groups


# Amplitude scale of the synthetic components, microvolts. The rhythm bases
# are multiplied by SynthConfig.snr; noise is fixed so that snr directly
# controls class separability.
NOISE_STD_UV = 4.0
MU_BASE_UV = 4.0
BETA_BASE_UV = 2.0
MU_HZ = 10.0
BETA_HZ = 20.0
#: Band-amplitude modulation starts this many seconds before onset (the
#: preparation period) and persists through the movement itself, so both the
#: intention window and the execution window see the class's power change.
PRE_ONSET_MOD_S = 1.5
EXEC_MOD_S = 1.5
#: The movement-related ramp rises over the last second before onset,
#: plateaus for the first second of execution, then decays over half a second.
ERP_RISE_S = 1.0
ERP_PLATEAU_S = 1.0
ERP_DECAY_S = 0.5


def _default_counts() -> dict[MovementClass, int]:
    return {MovementClass.RTR: 25, MovementClass.RTL: 23, MovementClass.WF: 27}


@dataclass
class SynthConfig:
    """Parameters of the synthetic trial generator.

    ``snr`` scales every class-specific component (rhythms and ramp), so
    snr = 0 yields pure noise and chance-level downstream accuracy.
    ``erd_depth`` is the fractional band-amplitude change applied on each
    class's designated channels during the pre-onset window; either one
    scalar for all classes or a per-class mapping. ``erp_amplitude_uv`` is
    the ramp peak in microvolts at snr = 1.
    """

    counts: dict[MovementClass, int] = field(default_factory=_default_counts)
    channels: int = 8
    sampling_rate: float = 600.0
    trial_duration_s: float = 6.0
    onset_time_s: float = 3.0
    snr: float = 3.0
    erd_depth: float | dict[MovementClass, float] = -0.3
    erp_amplitude_uv: float = 2.5
    noise_exponent: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        for cls, n in self.counts.items():
            if cls not in TRAINED_CLASSES:
                raise ValueError(f"counts key {cls} is not a trainable class")
            if n < 0:
                raise ValueError(f"count for {cls} must be >= 0, got {n}")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be > 0")
        if not 0 < self.onset_time_s < self.trial_duration_s:
            raise ValueError(
                f"onset_time_s must lie inside (0, trial_duration_s), "
                f"got {self.onset_time_s} of {self.trial_duration_s}"
            )
        if self.snr < 0:
            raise ValueError("snr must be >= 0")
        for cls in TRAINED_CLASSES:
            if self.depth_for(cls) < -1.0:
                raise ValueError("erd_depth must be >= -1")

    def depth_for(self, cls: MovementClass) -> float:
        if isinstance(self.erd_depth, dict):
            return float(self.erd_depth.get(cls, 0.0))
        return float(self.erd_depth)

    def erd_channels(self, cls: MovementClass) -> tuple[int, int]:
        """Channels whose rhythm amplitude is modulated for this class."""
        k = CLASS_ORDER[cls]
        return (2 * k) % self.channels, (2 * k + 1) % self.channels

    def erp_channels(self) -> tuple[int, int]:
        """The two channels carrying the movement-related ramp."""
        return max(self.channels - 2, 0), self.channels - 1

    def erp_polarity(self, cls: MovementClass) -> tuple[float, float]:
        """Per-class sign pattern of the ramp on the two ramp channels."""
        return {
            MovementClass.RTR: (1.0, 1.0),
            MovementClass.RTL: (-1.0, -1.0),
            MovementClass.WF: (1.0, -1.0),
        }[cls]


def _one_over_f_noise(rng: np.random.Generator, n: int, exponent: float) -> np.ndarray:
    """Unit-variance noise with power spectral density ~ 1/f**exponent."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    scale = np.zeros_like(freqs)
    scale[1:] = freqs[1:] ** (-exponent / 2.0)
    shaped = np.fft.irfft(spectrum * scale, n)
    std = shaped.std()
    if std > 0:
        shaped /= std
    return shaped


def _erp_shape(t_rel: np.ndarray) -> np.ndarray:
    """Unit-peak ramp as a function of time relative to onset (seconds)."""
    shape = np.zeros_like(t_rel)
    rise = (t_rel >= -ERP_RISE_S) & (t_rel < 0)
    shape[rise] = (t_rel[rise] + ERP_RISE_S) / ERP_RISE_S
    plateau = (t_rel >= 0) & (t_rel < ERP_PLATEAU_S)
    shape[plateau] = 1.0
    decay = (t_rel >= ERP_PLATEAU_S) & (t_rel < ERP_PLATEAU_S + ERP_DECAY_S)
    shape[decay] = 1.0 - (t_rel[decay] - ERP_PLATEAU_S) / ERP_DECAY_S
    return shape


def synthesize_dataset(config: SynthConfig) -> Dataset:
    """Generate a labeled dataset according to ``config``.

    Deterministic for a fixed seed: the same config always produces
    bit-identical sample values.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    rate = config.sampling_rate
    n = round(config.trial_duration_s * rate)
    onset_index = round(config.onset_time_s * rate)
    t = np.arange(n) / rate
    t_rel = t - config.onset_time_s

    mod_window = (t_rel >= -PRE_ONSET_MOD_S) & (t_rel < EXEC_MOD_S)
    erp = _erp_shape(t_rel)
    erp_ch = config.erp_channels()

    trials = []
    for cls in TRAINED_CLASSES:
        depth = config.depth_for(cls)
        erd_ch = set(config.erd_channels(cls))
        polarity = config.erp_polarity(cls)
        for i in range(config.counts.get(cls, 0)):
            samples = np.empty((config.channels, n))
            for ch in range(config.channels):
                x = NOISE_STD_UV * _one_over_f_noise(rng, n, config.noise_exponent)
                mu_amp = np.full(n, config.snr * MU_BASE_UV)
                beta_amp = np.full(n, config.snr * BETA_BASE_UV)
                if ch in erd_ch:
                    mu_amp[mod_window] *= 1.0 + depth
                    beta_amp[mod_window] *= 1.0 + depth
                phase_mu, phase_beta = rng.uniform(0, 2 * np.pi, 2)
                x += mu_amp * np.sin(2 * np.pi * MU_HZ * t + phase_mu)
                x += beta_amp * np.sin(2 * np.pi * BETA_HZ * t + phase_beta)
                samples[ch] = x
            peak = config.snr * config.erp_amplitude_uv
            samples[erp_ch[0]] += polarity[0] * peak * erp
            samples[erp_ch[1]] += polarity[1] * peak * erp
            trials.append(
                Trial(
                    trial_id=f"{cls.value.lower()}-{i:03d}",
                    label=cls,
                    samples=samples,
                    onset_index=onset_index,
                )
            )

    names = [f"ch{c}" for c in range(config.channels)]
    return Dataset(sampling_rate=rate, channel_names=names, trials=trials)


MANIFEST_NAME = "manifest.json"


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    """Write a dataset directory: manifest.json plus one CSV per trial.

    CSV layout is one row per time sample, one column per channel, plain
    decimal microvolts, no header. Values are written with enough digits
    to round-trip float64 exactly.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "sampling_rate_hz": dataset.sampling_rate,
        "channel_names": dataset.channel_names,
        "trials": [],
    }
    for t in dataset.trials:
        fname = f"{t.trial_id}.csv"
        np.savetxt(root / fname, t.samples.T, fmt="%.17g", delimiter=",")
        manifest["trials"].append(
            {
                "trial_id": t.trial_id,
                "label": t.label.value,
                "onset_index": t.onset_index,
                "file": fname,
            }
        )
    with open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return root


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset directory written by :func:`save_dataset`.

    Raises with the offending trial_id on any structural problem: missing
    manifest, channel/length mismatch, non-finite cells, duplicate ids, or
    an onset index outside the trial.
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing manifest: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)

    rate = float(manifest["sampling_rate_hz"])
    names = list(manifest["channel_names"])
    n_ch = len(names)

    trials = []
    expected_len: int | None = None
    for entry in manifest["trials"]:
        trial_id = entry["trial_id"]
        fpath = root / entry["file"]
        if not fpath.is_file():
            raise FileNotFoundError(f"trial {trial_id!r}: missing file {fpath}")
        raw = np.loadtxt(fpath, delimiter=",", ndmin=2)
        samples = raw.T
        if samples.shape[0] != n_ch:
            raise ValueError(
                f"trial {trial_id!r}: file {entry['file']} has "
                f"{samples.shape[0]} channels, manifest declares {n_ch}"
            )
        if expected_len is None:
            expected_len = samples.shape[1]
        elif samples.shape[1] != expected_len:
            raise ValueError(
                f"trial {trial_id!r}: length {samples.shape[1]} does not "
                f"match first trial ({expected_len})"
            )
        if not np.isfinite(samples).all():
            bad = np.argwhere(~np.isfinite(raw))[0]
            raise ValueError(
                f"trial {trial_id!r}: non-finite value in {entry['file']} "
                f"at row {bad[0]}, column {bad[1]}"
            )
        onset = int(entry["onset_index"])
        if not 0 < onset < samples.shape[1]:
            raise ValueError(
                f"trial {trial_id!r}: onset outside trial "
                f"(onset_index {onset}, trial length {samples.shape[1]})"
            )
        trials.append(
            Trial(
                trial_id=trial_id,
                label=MovementClass(entry["label"]),
                samples=samples,
                onset_index=onset,
            )
        )

    return Dataset(sampling_rate=rate, channel_names=names, trials=trials)


def split_half(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified half split; odd class counts put the extra trial in train.

    Returns (train, test). Every trial lands in exactly one half and the
    split is deterministic per seed. Trials keep their dataset order
    within each half.
    """
    rng = np.random.default_rng(seed)
    groups = dataset.by_class()
    for cls, members in groups.items():
        if len(members) < 2:
            raise ValueError(
                f"class {cls} has {len(members)} trial(s); "
                "need at least 2 to split"
            )

    train_ids: set[str] = set()
    for cls in TRAINED_CLASSES:
        members = groups[cls]
        order = rng.permutation(len(members))
        n_train = (len(members) + 1) // 2
        train_ids.update(members[i].trial_id for i in order[:n_train])

    train = [t for t in dataset.trials if t.trial_id in train_ids]
    test = [t for t in dataset.trials if t.trial_id not in train_ids]
    make = lambda ts: Dataset(dataset.sampling_rate, list(dataset.channel_names), ts)
    return make(train), make(test)


def bootstrap_resample(trials: list[Trial], n: int, seed: int) -> list[Trial]:
    """Draw ``n`` trials uniformly with replacement.

    Whole trials are resampled (never samples within a trial) so the
    within-trial temporal structure survives. Each resampled trial gets a
    fresh id recording its source.
    """
    if n == 0:
        return []
    if not trials:
        raise ValueError("cannot resample from an empty trial list")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(trials), size=n)
    out = []
    for k, idx in enumerate(picks):
        src = trials[int(idx)]
        out.append(
            replace(
                src,
                trial_id=f"bs{k:04d}-{src.trial_id}",
                samples=src.samples.copy(),
            )
        )
    return out
