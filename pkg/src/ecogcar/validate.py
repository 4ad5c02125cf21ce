"""Held-out evaluation, dual-window agreement, and invalid-input probing.

Three checks gate the recognition stage: the failure rate on a held-out
half (a rejected valid movement counts as a failure), agreement between two
pipeline instances fed the same trials through a pre-onset window and an
execution window, and behavior on inputs from no trained class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .classify import NflModel, NnModel, classify
from .dataset import TRAINED_CLASSES, Dataset, MovementClass, Trial, _one_over_f_noise
from .features import FeatureSpec, extract_features

#: Confusion matrix row order (predictions); columns follow TRAINED_CLASSES.
PREDICTED_ORDER = (*TRAINED_CLASSES, MovementClass.OTHER)


@dataclass
class EvaluationReport:
    """Confusion counts and the derived failure rate on a test set."""

    confusion: np.ndarray  # (4 predicted x 3 true) integer counts
    failure_rate: float
    per_class_accuracy: dict[str, float]
    n_test: int

    def to_dict(self) -> dict:
        return {
            "n_test": self.n_test,
            "failure_rate": self.failure_rate,
            "per_class_accuracy": self.per_class_accuracy,
            "predicted_order": [c.value for c in PREDICTED_ORDER],
            "true_order": [c.value for c in TRAINED_CLASSES],
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render_text(self) -> str:
        """Plain-text confusion matrix, predictions in rows."""
        header = "pred\\true " + " ".join(f"{c.value:>6}" for c in TRAINED_CLASSES)
        lines = [header]
        for i, pred in enumerate(PREDICTED_ORDER):
            row = " ".join(f"{int(n):>6}" for n in self.confusion[i])
            lines.append(f"{pred.value:<10} {row}")
        lines.append(f"failure_rate = {self.failure_rate:.4f} (n={self.n_test})")
        return "\n".join(lines)


@dataclass
class AgreementReport:
    """Output agreement between two pipeline instances on the same trials."""

    agreement_rate: float
    pairs: list[tuple[str, str, str]]  # (trial_id, pre output, exec output)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str, str]]) -> "AgreementReport":
        if not pairs:
            raise ValueError("no trials to compare")
        matches = sum(1 for _, a, b in pairs if a == b)
        return cls(agreement_rate=matches / len(pairs), pairs=pairs)

    def to_dict(self) -> dict:
        return {
            "agreement_rate": self.agreement_rate,
            "n_trials": len(self.pairs),
            "pairs": [list(p) for p in self.pairs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class RobustnessReport:
    """Outcome tally of feeding inputs the classifier was never trained on."""

    n_inputs: int
    n_classified: int
    n_rejected: int
    errors_raised: int
    rejection_rate: float
    outcomes: list[str] = field(default_factory=list)
    error_messages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_classified": self.n_classified,
            "n_rejected": self.n_rejected,
            "errors_raised": self.errors_raised,
            "rejection_rate": self.rejection_rate,
            "outcomes": self.outcomes,
            "error_messages": self.error_messages,
        }


def _check_fingerprint(model, spec: FeatureSpec) -> None:
    fp = getattr(model, "spec_fingerprint", "")
    if fp and fp != spec.fingerprint():
        raise ValueError(
            "feature spec fingerprint mismatch: model was trained with "
            f"{fp}, got {spec.fingerprint()}"
        )


def _predict(model, trial: Trial, spec: FeatureSpec) -> MovementClass:
    fv = extract_features(trial, spec)
    if callable(model) and not isinstance(model, (NnModel, NflModel)):
        cls, _ = model(fv)
    else:
        cls, _ = classify(model, fv)
    return cls


def evaluate(model, spec: FeatureSpec, test: Dataset) -> EvaluationReport:
    """Classify every test trial and tabulate failures.

    A prediction counts as a failure whenever it differs from the true
    label; a rejection (OTHER) of a valid movement is therefore a failure.
    """
    if not test.trials:
        raise ValueError("empty test set")
    _check_fingerprint(model, spec)

    pred_idx = {cls: i for i, cls in enumerate(PREDICTED_ORDER)}
    true_idx = {cls: i for i, cls in enumerate(TRAINED_CLASSES)}
    confusion = np.zeros((len(PREDICTED_ORDER), len(TRAINED_CLASSES)), dtype=int)
    correct = 0
    for trial in test.trials:
        pred = _predict(model, trial, spec)
        confusion[pred_idx[pred], true_idx[trial.label]] += 1
        if pred is trial.label:
            correct += 1

    n = len(test.trials)
    per_class = {}
    for cls in TRAINED_CLASSES:
        col = true_idx[cls]
        total = int(confusion[:, col].sum())
        if total:
            per_class[cls.value] = float(confusion[pred_idx[cls], col] / total)
    return EvaluationReport(
        confusion=confusion,
        failure_rate=1.0 - correct / n,
        per_class_accuracy=per_class,
        n_test=n,
    )


def two_instance_agreement(
    model_pre,
    model_exec,
    spec_pre: FeatureSpec,
    spec_exec: FeatureSpec,
    test: Dataset,
) -> AgreementReport:
    """Run the pre-onset and execution-window pipelines on the same trials.

    The pre-onset spec must end its analysis window at or before onset and
    the execution spec must start at onset or later; equal outputs on a
    trial (including OTHER = OTHER) count as agreement.
    """
    if spec_pre.analysis_window.end_s > 0:
        raise ValueError(
            f"pre-onset analysis window must end at or before onset, "
            f"ends at {spec_pre.analysis_window.end_s}s"
        )
    if spec_exec.analysis_window.start_s < 0:
        raise ValueError(
            f"execution analysis window must start at onset or later, "
            f"starts at {spec_exec.analysis_window.start_s}s"
        )
    _check_fingerprint(model_pre, spec_pre)
    _check_fingerprint(model_exec, spec_exec)

    pairs = []
    for trial in test.trials:
        a = _predict(model_pre, trial, spec_pre)
        b = _predict(model_exec, trial, spec_exec)
        pairs.append((trial.trial_id, a.value, b.value))
    return AgreementReport.from_pairs(pairs)


def robustness_probe(model, spec: FeatureSpec, invalid_trials: list[Trial]) -> RobustnessReport:
    """Feed untrained inputs through the pipeline and tally what happens.

    Structurally broken trials (non-finite samples, wrong channel count)
    must raise inside the pipeline and are tallied as errors; everything
    that classifies contributes to the rejection rate. The probe itself
    never raises.
    """
    outcomes = []
    errors = []
    n_rejected = 0
    n_classified = 0
    for trial in invalid_trials:
        try:
            pred = _predict(model, trial, spec)
        except Exception as exc:  # noqa: BLE001 - every failure is an outcome
            outcomes.append("error")
            errors.append(f"{trial.trial_id}: {exc}")
            continue
        n_classified += 1
        outcomes.append(pred.value)
        if pred is MovementClass.OTHER:
            n_rejected += 1
    return RobustnessReport(
        n_inputs=len(invalid_trials),
        n_classified=n_classified,
        n_rejected=n_rejected,
        errors_raised=len(errors),
        rejection_rate=n_rejected / n_classified if n_classified else 0.0,
        outcomes=outcomes,
        error_messages=errors,
    )


def make_invalid_trials(
    reference: Dataset, n: int, seed: int, kind: str = "noise"
) -> list[Trial]:
    """Build structurally valid trials from no trained class.

    ``noise`` matches the reference trials' overall amplitude and spectral
    color but carries no rhythm or ramp; ``zero`` is all zeros (degenerate);
    ``extreme`` is noise at 1000x amplitude.
    """
    if kind not in ("noise", "zero", "extreme"):
        raise ValueError(f"unknown invalid-trial kind {kind!r}")
    rng = np.random.default_rng(seed)
    shape = (reference.n_channels, reference.n_samples)
    onset = reference.trials[0].onset_index
    std = float(np.mean([t.samples.std() for t in reference.trials]))
    out = []
    for i in range(n):
        if kind == "zero":
            samples = np.zeros(shape)
        else:
            samples = np.stack(
                [std * _one_over_f_noise(rng, shape[1], 1.0) for _ in range(shape[0])]
            )
            if kind == "extreme":
                samples *= 1000.0
        out.append(
            Trial(
                trial_id=f"invalid-{kind}-{i:03d}",
                label=MovementClass.RTR,  # placeholder; probes ignore labels
                samples=samples,
                onset_index=onset,
            )
        )
    return out
