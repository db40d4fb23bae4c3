"""Persistence for trained parameters and full tracker models.

Both formats are numpy archives: parameter files carry the five weight
blocks plus the feature dimension; model files additionally carry the
tree set, all four dictionaries and an echo of the effective config.
Arrays round-trip bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .rnn import Theta
from .sparse import Dictionary
from .tracker import TrackerConfig, TrackerModel
from .tree import MergeTree

THETA_FORMAT = 1
MODEL_FORMAT = 1


def save_theta(path, theta: Theta) -> None:
    np.savez(path, format_version=THETA_FORMAT, n=theta.n, **theta.blocks())


def load_theta(path) -> Theta:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != THETA_FORMAT:
            raise ValueError(f"unsupported parameter file version {version}")
        return Theta(*(data[k].copy() for k in
                       ("w_leaf", "b_leaf", "w_merge", "b_merge", "w_class")))


def _dict_arrays(prefix: str, d: Dictionary) -> dict:
    return {
        f"{prefix}_atoms": d.atoms,
        f"{prefix}_positions": d.positions,
        f"{prefix}_frames": d.frames,
        f"{prefix}_seed_flags": d.seed_flags,
    }


def _dict_from(prefix: str, data) -> Dictionary:
    return Dictionary(*(data[f"{prefix}_{k}"].copy()
                        for k in ("atoms", "positions", "frames", "seed_flags")))


def save_model(path, model: TrackerModel) -> None:
    payload = {
        "format_version": MODEL_FORMAT,
        "n": model.theta.n,
        "config_json": json.dumps(dataclasses.asdict(model.config)),
        "trees": np.array([t.merges for t in model.trees], dtype=np.int64),
        "has_feature_dicts": model.feature_dicts is not None,
    }
    payload.update({f"theta_{k}": v for k, v in model.theta.blocks().items()})
    payload.update(_dict_arrays("raw_holistic", model.raw_dicts[0]))
    payload.update(_dict_arrays("raw_local", model.raw_dicts[1]))
    if model.feature_dicts is not None:
        payload.update(_dict_arrays("feat_holistic", model.feature_dicts[0]))
        payload.update(_dict_arrays("feat_local", model.feature_dicts[1]))
    np.savez(path, **payload)


def load_model(path) -> TrackerModel:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != MODEL_FORMAT:
            raise ValueError(f"unsupported model file version {version}")
        theta = Theta(*(data[f"theta_{k}"].copy() for k in
                        ("w_leaf", "b_leaf", "w_merge", "b_merge", "w_class")))
        raw = json.loads(str(data["config_json"]))
        raw["motion_std"] = tuple(raw["motion_std"])
        config = TrackerConfig(**raw)
        trees = [MergeTree(tuple(tuple(int(v) for v in row) for row in entry))
                 for entry in data["trees"]]
        raw_dicts = (_dict_from("raw_holistic", data), _dict_from("raw_local", data))
        feature_dicts = None
        if bool(data["has_feature_dicts"]):
            feature_dicts = (_dict_from("feat_holistic", data),
                             _dict_from("feat_local", data))
        return TrackerModel(theta, trees, feature_dicts, raw_dicts, config)
