"""Pipeline configuration: one TOML file plus flag overrides (flags win)."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..dataset import MovementClass, SynthConfig
from ..features import FeatureSpec
from ..preprocess import FrequencyBand, WindowSpec

CLASSIFIER_KINDS = ("nn", "nfl")
PORT_KINDS = ("loopback", "file", "tcp")

DEFAULT_BAND_EDGES = ((8.0, 12.0), (16.0, 24.0), (75.0, 100.0))


@dataclass
class PipelineConfig:
    """Everything an end-to-end run or the live service needs."""

    dataset_path: str | None = None  # load from disk when set, else synthesize
    synth: SynthConfig = field(default_factory=SynthConfig)
    classifier: str = "nn"
    rejection_percentile: float = 95.0
    seed: int = 42
    out_dir: str = "out"

    # feature extraction
    bands: tuple[tuple[float, float], ...] = DEFAULT_BAND_EDGES
    analysis_start_s: float = -1.5
    analysis_end_s: float = 0.0
    exec_start_s: float = 0.0
    exec_end_s: float = 1.5
    reference_start_s: float = 0.0
    reference_end_s: float = 1.0
    erp_downsample_factor: int = 225
    frame_s: float = 0.25
    hop_s: float = 0.125

    # control / service
    tick_hz: float = 20.0
    car_speed_mps: float = 0.5
    port_kind: str = "loopback"
    port_path: str | None = None  # file port target; defaults inside out_dir
    port_addr: str | None = None  # "host:port" for the tcp port
    bind: str = "127.0.0.1:7600"
    static_dir: str | None = None

    def __post_init__(self) -> None:
        if self.classifier not in CLASSIFIER_KINDS:
            raise ValueError(
                f"classifier must be one of {CLASSIFIER_KINDS}, got {self.classifier!r}"
            )
        if self.port_kind not in PORT_KINDS:
            raise ValueError(
                f"port_kind must be one of {PORT_KINDS}, got {self.port_kind!r}"
            )
        self.synth.validate()

    def feature_spec(self) -> FeatureSpec:
        """Pre-onset feature spec (the primary recognition instance)."""
        return self._spec(self.analysis_start_s, self.analysis_end_s)

    def exec_feature_spec(self) -> FeatureSpec:
        """Execution-window spec for the second recognition instance."""
        return self._spec(self.exec_start_s, self.exec_end_s)

    def _spec(self, start_s: float, end_s: float) -> FeatureSpec:
        return FeatureSpec(
            bands=tuple(FrequencyBand(lo, hi) for lo, hi in self.bands),
            analysis_window=WindowSpec(start_s, end_s),
            reference_start_s=self.reference_start_s,
            reference_end_s=self.reference_end_s,
            erp_downsample_factor=self.erp_downsample_factor,
            frame_s=self.frame_s,
            hop_s=self.hop_s,
        )

    def bind_host_port(self) -> tuple[str, int]:
        host, _, port = self.bind.rpartition(":")
        return host or "127.0.0.1", int(port)


def _synth_from_table(table: dict) -> SynthConfig:
    kwargs = dict(table)
    if "counts" in kwargs:
        kwargs["counts"] = {
            MovementClass(k): int(v) for k, v in kwargs["counts"].items()
        }
    if "erd_depth" in kwargs and isinstance(kwargs["erd_depth"], dict):
        kwargs["erd_depth"] = {
            MovementClass(k): float(v) for k, v in kwargs["erd_depth"].items()
        }
    return SynthConfig(**kwargs)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a TOML config file; a missing path gives all defaults."""
    if path is None:
        return PipelineConfig()
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    synth = _synth_from_table(doc.pop("synth", {}))
    if "bands" in doc:
        doc["bands"] = tuple(tuple(float(e) for e in b) for b in doc["bands"])
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(synth=synth, **doc)


def apply_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    """Apply non-None CLI flag values on top of a loaded config."""
    synth = config.synth
    if overrides.get("snr") is not None:
        synth = replace(synth, snr=overrides["snr"])
    updates = {
        k: v
        for k, v in overrides.items()
        if k != "snr" and v is not None and hasattr(config, k)
    }
    return replace(config, synth=synth, **updates)
