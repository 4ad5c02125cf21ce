"""ecogcar: intended-movement recognition from multichannel cortical
recordings, driving a simulated remote-control car through a single-switch
scanning direction controller.

Stage 1 turns a trial into pre-onset band-power-change and waveform
features, classifies it with a nearest-neighbor or nearest-feature-line
model (with distance-threshold rejection), and emits a 2-bit digital code.
Stage 2 collapses the codes to switch pulses that scan a 16-point compass
rose, writes 4-bit heading commands to a simulated device port, and moves
the car.
"""

from .dataset import (
    Dataset,
    MovementClass,
    SynthConfig,
    Trial,
    bootstrap_resample,
    load_dataset,
    save_dataset,
    split_half,
    synthesize_dataset,
)
from .features import FeatureSpec, FeatureVector, extract_features, fit_feature_spec
from .classify import (
    DigitalCode,
    NflModel,
    NnModel,
    classify_nfl,
    classify_nn,
    encode_class,
    train_nfl,
    train_nn,
)
from .validate import evaluate, robustness_probe, two_instance_agreement

__version__ = "0.1.0"
