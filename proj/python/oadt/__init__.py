# Copyright (C) 2026 The OADT Authors
# SPDX-License-Identifier: Apache-2.0
#
"""Python interface to the oadt temporal action detector.

Configs are flat dicts using the same keys as the command-line tool's JSON
run config. Prediction sets are dicts mapping a video id to a list of
detection dicts with keys start_sec, end_sec, verb, noun, action and score.
"""

import json
import os

from . import _core
from ._core import OadtError, cosine_lr, iou1d, quantize_score, read_features, write_features

__all__ = [
    "OadtError",
    "cosine_lr",
    "default_config",
    "default_synth_spec",
    "ensemble",
    "evaluate",
    "iou1d",
    "match_and_ap",
    "predict",
    "quantize_score",
    "read_annotations",
    "read_features",
    "read_predictions",
    "soft_nms",
    "synthesize",
    "train",
    "write_features",
    "write_predictions",
]

__version__ = "0.1.0"


def _config_text(config):
    return json.dumps(dict(config or {}))


def default_config():
    """Every run-config key with its default value."""
    return json.loads(_core.default_config())


def default_synth_spec():
    return json.loads(_core.default_synth_spec())


def synthesize(out_dir, **spec):
    """Write a seeded synthetic dataset; returns the annotation file path."""
    _core.synthesize(os.fspath(out_dir), json.dumps(spec))
    return os.path.join(os.fspath(out_dir), "annotations.json")


def read_annotations(path):
    return json.loads(_core.read_annotations(os.fspath(path)))


def train(annotations, out_dir, config=None):
    """Train and write checkpoints and logs to out_dir; returns metric lines."""
    return _core.train(os.fspath(annotations), os.fspath(out_dir), _config_text(config))


def predict(checkpoint, annotations, config=None):
    """Returns (detections, candidates) as prediction sets."""
    dets, cands = _core.predict(os.fspath(checkpoint), os.fspath(annotations),
                                _config_text(config))
    return json.loads(dets), json.loads(cands)


def soft_nms(predictions, config=None):
    return json.loads(_core.soft_nms(json.dumps(predictions), _config_text(config)))


def ensemble(prediction_sets, weights=(), config=None):
    texts = [json.dumps(p) for p in prediction_sets]
    return json.loads(_core.ensemble(texts, list(weights), _config_text(config)))


def evaluate(predictions, annotations, thresholds=()):
    """Returns (report dict, rendered table)."""
    report, table = _core.evaluate(json.dumps(predictions), os.fspath(annotations),
                                   list(thresholds))
    return json.loads(report), table


def match_and_ap(predictions, ground_truth, threshold):
    """AP of one class; predictions are (video, start, end, score) tuples and
    ground truth (video, start, end). None when there is no ground truth."""
    return _core.match_and_ap(list(predictions), list(ground_truth), threshold)


def read_predictions(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_predictions(path, predictions):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(predictions, f, indent=2)
        f.write("\n")
