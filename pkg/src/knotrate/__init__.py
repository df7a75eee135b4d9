"""knotrate: windowed temporal classification and rating of surgical
knot-tying videos.

Pipeline: per-chunk feature vectors -> dilated temporal convolutional
classifier (12 action x level classes for the middle position) -> seed
ensemble with majority voting -> one-vs-all metric suite under k-fold
cross-validation.
"""

from .domain import (
    Action,
    AnnotationTrack,
    ClassLabel,
    DatasetManifest,
    Level,
    chunk_labels,
    chunk_video,
    class_from_index,
    class_index,
    label_at,
    parse_annotations,
)
from .featstore import FeatureSequence, SynthConfig, read_features, synth_dataset, write_features
from .tcn import ArchConfig, TemporalModel, TrainConfig, forward, grad_check, init_model, train
from .ensemble import Ensemble, predict_timeline, train_ensemble, vote
from .harness import kfold_split, run_cv

__all__ = [
    "Action",
    "AnnotationTrack",
    "ArchConfig",
    "ClassLabel",
    "DatasetManifest",
    "Ensemble",
    "FeatureSequence",
    "Level",
    "SynthConfig",
    "TemporalModel",
    "TrainConfig",
    "chunk_labels",
    "chunk_video",
    "class_from_index",
    "class_index",
    "forward",
    "grad_check",
    "init_model",
    "kfold_split",
    "label_at",
    "parse_annotations",
    "predict_timeline",
    "read_features",
    "run_cv",
    "synth_dataset",
    "train",
    "train_ensemble",
    "vote",
    "write_features",
]

__version__ = "0.1.0"
