"""Nearest-neighbor and nearest-feature-line classification with rejection.

Both classifiers compare a query vector against stored training exemplars
by squared Euclidean distance; the feature-line variant measures distance
to the line through every same-class pair instead of to the points, with
the projection deliberately unconstrained (extrapolation beyond the pair is
allowed, which is exactly what makes the classic line-interpolation
pathology reproducible). A query whose best distance exceeds the model's
rejection threshold maps to OTHER. Outputs feed the control stage as 2-bit
digital codes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import _kernels
from .dataset import TRAINED_CLASSES, MovementClass
from .features import FeatureVector


class DigitalCode(Enum):
    """2-bit output word; the all-zeros code is the idle/reject state."""

    CODE_00 = "00"
    CODE_01 = "01"
    CODE_10 = "10"
    CODE_11 = "11"

    @property
    def bits(self) -> str:
        return self.value


_CLASS_TO_CODE = {
    MovementClass.RTR: DigitalCode.CODE_01,
    MovementClass.RTL: DigitalCode.CODE_10,
    MovementClass.WF: DigitalCode.CODE_11,
    MovementClass.OTHER: DigitalCode.CODE_00,
}
_CODE_TO_CLASS = {code: cls for cls, code in _CLASS_TO_CODE.items()}


def encode_class(cls: MovementClass) -> DigitalCode:
    """Fixed code table: RTR -> 01, RTL -> 10, WF -> 11, OTHER -> 00."""
    return _CLASS_TO_CODE[cls]


def decode_code(code: DigitalCode) -> MovementClass:
    return _CODE_TO_CLASS[code]


def _vec(v) -> np.ndarray:
    values = v.values if isinstance(v, FeatureVector) else v
    return np.asarray(values, dtype=np.float64)


def squared_distance(a, b) -> float:
    """Sum of squared componentwise differences."""
    av, bv = _vec(a), _vec(b)
    if av.shape != bv.shape:
        raise ValueError(f"vector length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    d = av - bv
    return float(np.dot(d, d))


def nfl_line_distance(q, x1, x2) -> tuple[float, float]:
    """Squared distance from q to the line through x1 and x2, plus the
    projection parameter mu (0 at x1, 1 at x2, unconstrained outside)."""
    qv, a, b = _vec(q), _vec(x1), _vec(x2)
    if not (qv.shape == a.shape == b.shape):
        raise ValueError("vector length mismatch")
    direction = b - a
    denom = float(np.dot(direction, direction))
    if denom == 0.0:
        raise ValueError("degenerate line: x1 equals x2")
    mu = float(np.dot(qv - a, direction)) / denom
    resid = qv - (a + mu * direction)
    return float(np.dot(resid, resid)), mu


def _stack_training(vectors, labels):
    X = np.stack([_vec(v) for v in vectors]).astype(np.float64)
    labels = list(labels)
    if X.shape[0] != len(labels):
        raise ValueError("one label per vector required")
    counts: dict[MovementClass, int] = {}
    for lab in labels:
        if lab not in TRAINED_CLASSES:
            raise ValueError(f"{lab} is not a trainable class")
        counts[lab] = counts.get(lab, 0) + 1
    for cls, n in counts.items():
        if n < 2:
            raise ValueError(f"class {cls} has {n} exemplar(s); need at least 2")
    return X, labels


@dataclass
class NnModel:
    exemplars: np.ndarray  # (n, dim)
    labels: list[MovementClass]
    rejection_threshold: float
    spec_fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.rejection_threshold < 0:
            raise ValueError("rejection threshold must be >= 0")
        self.exemplars, self.labels = _stack_training(self.exemplars, self.labels)

    @property
    def dim(self) -> int:
        return self.exemplars.shape[1]


@dataclass
class NflModel:
    exemplars: np.ndarray  # (n, dim)
    labels: list[MovementClass]
    rejection_threshold: float
    spec_fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.rejection_threshold < 0:
            raise ValueError("rejection threshold must be >= 0")
        self.exemplars, self.labels = _stack_training(self.exemplars, self.labels)
        self._points_by_class: dict[MovementClass, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.exemplars.shape[1]

    def class_points(self) -> dict[MovementClass, np.ndarray]:
        """Per-class point sets in canonical class order, training order within."""
        if self._points_by_class is None:
            out: dict[MovementClass, np.ndarray] = {}
            for cls in TRAINED_CLASSES:
                rows = [i for i, lab in enumerate(self.labels) if lab is cls]
                if rows:
                    out[cls] = self.exemplars[rows]
            self._points_by_class = out
        return self._points_by_class


def train_nn(
    vectors,
    labels,
    rejection_percentile: float = 95.0,
    spec_fingerprint: str = "",
) -> NnModel:
    """Store all exemplars and calibrate the rejection threshold.

    The threshold is the given percentile (linear interpolation) of the
    leave-one-out nearest-neighbor squared distances over the training set,
    so at percentile 100 no training point would be rejected.
    """
    if not 0 <= rejection_percentile <= 100:
        raise ValueError("rejection_percentile must be in [0, 100]")
    X, labels = _stack_training(vectors, labels)
    loo = _kernels.loo_nn_sq_distances(X)
    tau = float(np.percentile(loo, rejection_percentile))
    return NnModel(X, labels, tau, spec_fingerprint)


def classify_nn(model: NnModel, v) -> tuple[MovementClass, float]:
    """Nearest exemplar's class, or OTHER beyond the rejection threshold.

    Ties break toward the lowest exemplar index. Returns the winning
    squared distance either way.
    """
    q = _vec(v)
    if q.shape[0] != model.dim:
        raise ValueError(f"vector length mismatch: {q.shape[0]} vs model {model.dim}")
    idx, d2 = _kernels.nn_scan(model.exemplars, q)
    if d2 <= model.rejection_threshold:
        return model.labels[idx], d2
    return MovementClass.OTHER, d2


def _nfl_best(
    points_by_class: dict[MovementClass, np.ndarray],
    q: np.ndarray,
    exclude: tuple[MovementClass, int] | None = None,
) -> tuple[MovementClass | None, float]:
    """Best class by minimum line distance; first class in canonical order
    wins ties. ``exclude`` removes one point (by class and row) from its
    class's pair enumeration."""
    best_cls = None
    best_d2 = np.inf
    for cls, points in points_by_class.items():
        skip = exclude[1] if exclude is not None and exclude[0] is cls else -1
        d2, i, j, _mu = _kernels.nfl_scan(points, q, skip)
        if i >= 0 and d2 < best_d2:
            best_d2 = d2
            best_cls = cls
    return best_cls, float(best_d2)


def train_nfl(
    vectors,
    labels,
    rejection_percentile: float = 95.0,
    spec_fingerprint: str = "",
) -> NflModel:
    """Store per-class point sets and calibrate rejection like train_nn,
    except each leave-one-out query is measured against feature lines and
    its own class contributes no pairs containing the held-out point."""
    if not 0 <= rejection_percentile <= 100:
        raise ValueError("rejection_percentile must be in [0, 100]")
    X, labels = _stack_training(vectors, labels)
    model = NflModel(X, labels, 0.0, spec_fingerprint)
    points_by_class = model.class_points()
    # Row of each exemplar within its own class's point array.
    within: dict[MovementClass, int] = {cls: 0 for cls in points_by_class}
    loo = []
    for lab in labels:
        q_row = within[lab]
        within[lab] += 1
        q = points_by_class[lab][q_row]
        cls, d2 = _nfl_best(points_by_class, q, exclude=(lab, q_row))
        if cls is not None:
            loo.append(d2)
    if not loo:
        raise ValueError("no feature lines available to calibrate the threshold")
    model.rejection_threshold = float(np.percentile(loo, rejection_percentile))
    return model


def classify_nfl(model: NflModel, v) -> tuple[MovementClass, float]:
    """Class of the nearest feature line, or OTHER beyond the threshold.

    All within-class point pairs of every class compete; ties break toward
    the lowest class order, then the lowest pair index. Degenerate pairs
    (duplicate points, as bootstrap resampling produces) span no line and
    are skipped.
    """
    q = _vec(v)
    if q.shape[0] != model.dim:
        raise ValueError(f"vector length mismatch: {q.shape[0]} vs model {model.dim}")
    cls, d2 = _nfl_best(model.class_points(), q)
    if cls is None:
        raise ValueError("model has no non-degenerate feature lines")
    if d2 <= model.rejection_threshold:
        return cls, d2
    return MovementClass.OTHER, d2


def classify(model, v) -> tuple[MovementClass, float]:
    """Dispatch on model kind."""
    if isinstance(model, NnModel):
        return classify_nn(model, v)
    if isinstance(model, NflModel):
        return classify_nfl(model, v)
    raise TypeError(f"unknown model type {type(model).__name__}")


MODEL_FORMAT_VERSION = 1


def save_model(model: NnModel | NflModel, path: str | Path) -> Path:
    path = Path(path)
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "nn" if isinstance(model, NnModel) else "nfl",
        "rejection_threshold": model.rejection_threshold,
        "spec_fingerprint": model.spec_fingerprint,
        "labels": [lab.value for lab in model.labels],
        "exemplars": model.exemplars.tolist(),
    }
    path.write_text(json.dumps(doc))
    return path


def load_model(path: str | Path) -> NnModel | NflModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {doc.get('format_version')}")
    cls = NnModel if doc["kind"] == "nn" else NflModel
    return cls(
        exemplars=np.asarray(doc["exemplars"], dtype=np.float64),
        labels=[MovementClass(lab) for lab in doc["labels"]],
        rejection_threshold=float(doc["rejection_threshold"]),
        spec_fingerprint=doc["spec_fingerprint"],
    )
