"""EEG segment classification with dilated causal convolutions."""

import json

from ._seqcls import (
    ConfigError,
    FormatError,
    InputError,
    Model,
    NumericalError,
    ShapeError,
    auc_ovr_macro,
    class_weights,
    composite_score,
    confusion_matrix,
    focal_loss,
    metrics_from_matrix,
    read_container,
    receptive_field,
    split_counts,
    split_dataset,
    synth_generate,
    update_dropout,
)

CLASS_NAMES = ("Noise", "Artifacts", "Physiological", "Pathological")
SPLITS = ("train", "val", "test")


def build_model(architecture="wavenet", seed=0, **config):
    """Build a freshly initialised model; keyword arguments override config fields."""
    return Model.build(architecture, json.dumps(config) if config else "", seed)


__all__ = [
    "CLASS_NAMES",
    "SPLITS",
    "ConfigError",
    "FormatError",
    "InputError",
    "Model",
    "NumericalError",
    "ShapeError",
    "auc_ovr_macro",
    "build_model",
    "class_weights",
    "composite_score",
    "confusion_matrix",
    "focal_loss",
    "metrics_from_matrix",
    "read_container",
    "receptive_field",
    "split_counts",
    "split_dataset",
    "synth_generate",
    "update_dropout",
]
