"""Sleep onset/wakeup annotation for wrist-worn accelerometer series.

The pieces compose as: ``synth`` or ``csvio`` supply series and events,
``features`` builds rolling statistics, ``rules`` detects windows without a
model, ``classifiers`` learns per-step sleep probabilities, ``extract`` turns
those into events, and ``edap`` scores any set of predicted events.
"""

from .edap import DEFAULT_TOLERANCES, EdapReport, brute_force_ap, edap
from .extract import ExtractConfig, extract
from .features import FeatureMatrix, FeatureSpec, build_features, default_specs
from .model import (
    EventClass,
    LabeledEvent,
    Sample,
    ScoredEvent,
    ScoringInterval,
    Series,
    SleepWindow,
    night_of,
    validate_series,
    window_duration,
)
from .rules import DetectorConfig, detect
from .synth import SynthConfig, generate, generate_corpus

__version__ = "0.1.0"
