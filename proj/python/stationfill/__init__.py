"""Gap filling for hourly weather-station networks."""

import json
import os

from . import _core
from ._core import (
    SENTINEL,
    Error,
    Model,
    build_dataset,
    enumerate_masks,
    feature_names,
    metrics,
    qc,
    set_log_level,
)

__all__ = [
    "SENTINEL",
    "Error",
    "Model",
    "build_dataset",
    "enumerate_masks",
    "feature_names",
    "metrics",
    "qc",
    "run",
    "set_log_level",
    "synth",
    "train",
]


def run(command, config=None, base_dir="."):
    """Run one pipeline stage (synth, qc, build-dataset, train, evaluate, impute).

    Returns the exit code the command-line tool would return.
    """
    return _core.run(command, json.dumps(config or {}), os.fspath(base_dir))


def synth(config=None, corrupted=True):
    """Station id -> hourly values of a synthetic network."""
    return _core.synth(json.dumps(config or {}), corrupted)


def train(kind, X, y, X_val, y_val, config=None, parameter="T"):
    return Model.train(kind, X, y, X_val, y_val, json.dumps(config or {}), parameter)
