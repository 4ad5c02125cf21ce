"""End-to-end orchestration: configuration, pipeline runs, the live
telemetry/steering service, and the command-line interface."""

from .config import PipelineConfig
from .pipeline import PipelineResult, StageError, run_end_to_end
from .server import Service, serve

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "StageError",
    "run_end_to_end",
    "Service",
    "serve",
]
