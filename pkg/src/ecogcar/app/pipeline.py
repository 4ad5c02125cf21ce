"""The full two-stage run: data to reports to command log.

One seed governs everything: synthesis (when no dataset path is given) runs
at ``config.seed`` and the half split at ``config.seed + 1``, so a repeated
run writes byte-identical reports and command logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from ..classify import encode_class, save_model, train_nfl, train_nn
from ..control import ControlSimulator, FilePort, LoopbackPort, TcpPort
from ..dataset import Dataset, MovementClass, load_dataset, split_half, synthesize_dataset
from ..features import extract_features, fit_feature_spec
from ..validate import AgreementReport, EvaluationReport, evaluate, two_instance_agreement
from .config import PipelineConfig


class StageError(RuntimeError):
    """An error wrapped with the pipeline stage it came from."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    evaluation: EvaluationReport
    agreement: AgreementReport
    predictions: list[tuple[str, str]]  # (trial_id, predicted label)
    command_log: list[dict]
    n_pulses: int
    out_dir: Path | None


def _stage(name: str):
    def deco(fn):
        def wrapped(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return wrapped
    return deco


@_stage("dataset")
def _obtain_dataset(config: PipelineConfig) -> Dataset:
    if config.dataset_path:
        return load_dataset(config.dataset_path)
    return synthesize_dataset(replace(config.synth, seed=config.seed))


def _train(config: PipelineConfig, spec, train_set: Dataset):
    vectors = [extract_features(t, spec) for t in train_set.trials]
    labels = [t.label for t in train_set.trials]
    trainer = train_nn if config.classifier == "nn" else train_nfl
    return trainer(
        vectors,
        labels,
        rejection_percentile=config.rejection_percentile,
        spec_fingerprint=spec.fingerprint(),
    )


def _make_port(config: PipelineConfig, out_dir: Path | None):
    if config.port_kind == "file":
        path = config.port_path or (out_dir or Path(".")) / "commands.ndjson"
        path = Path(path)
        if path.exists():
            path.unlink()  # a run owns its log; never append across runs
        return FilePort(path)
    if config.port_kind == "tcp":
        host, _, port = (config.port_addr or "127.0.0.1:7601").rpartition(":")
        return TcpPort(host or "127.0.0.1", int(port))
    return LoopbackPort()


def run_end_to_end(config: PipelineConfig, write: bool = True) -> PipelineResult:
    """Synthesize/load, split, fit, train, validate, then drive the car.

    Every non-OTHER test prediction becomes one switch pulse through the
    scanning controller, so the command log carries exactly one state
    change per recognized movement. Reports and the command log land in
    ``config.out_dir`` unless ``write`` is off.
    """
    out_dir = Path(config.out_dir) if write else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    dataset = _obtain_dataset(config)

    try:
        train_set, test_set = split_half(dataset, config.seed + 1)
    except Exception as exc:
        raise StageError("split", exc) from exc

    try:
        spec_pre = fit_feature_spec(train_set, config.feature_spec())
        spec_exec = fit_feature_spec(train_set, config.exec_feature_spec())
    except Exception as exc:
        raise StageError("features", exc) from exc

    try:
        model_pre = _train(config, spec_pre, train_set)
        model_exec = _train(config, spec_exec, train_set)
    except Exception as exc:
        raise StageError("train", exc) from exc

    try:
        report = evaluate(model_pre, spec_pre, test_set)
    except Exception as exc:
        raise StageError("evaluate", exc) from exc

    try:
        agreement = two_instance_agreement(
            model_pre, model_exec, spec_pre, spec_exec, test_set
        )
    except Exception as exc:
        raise StageError("agree", exc) from exc

    try:
        predictions = [(tid, pre) for tid, pre, _ in agreement.pairs]
        port = _make_port(config, out_dir)
        with port:
            sim = ControlSimulator(
                port, tick_hz=config.tick_hz, speed_mps=config.car_speed_mps
            )
            for _tid, label in predictions:
                sim.submit_code(encode_class(MovementClass(label)))
            sim.run(len(predictions))
            command_log = list(port.log)
        n_pulses = sum(1 for _, label in predictions if label != "OTHER")
    except Exception as exc:
        raise StageError("control", exc) from exc

    if out_dir is not None:
        try:
            (out_dir / "evaluation.json").write_text(report.to_json())
            (out_dir / "agreement.json").write_text(agreement.to_json())
            if config.port_kind != "file":
                lines = [json.dumps(e) for e in command_log]
                (out_dir / "commands.ndjson").write_text(
                    "\n".join(lines) + ("\n" if lines else "")
                )
            save_model(model_pre, out_dir / "model.json")
        except Exception as exc:
            raise StageError("write", exc) from exc

    return PipelineResult(
        evaluation=report,
        agreement=agreement,
        predictions=predictions,
        command_log=command_log,
        n_pulses=n_pulses,
        out_dir=out_dir,
    )
