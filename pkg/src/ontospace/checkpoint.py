"""Self-describing checkpoint container: version tag, config echo, named tensors.

Backed by the npz archive format; tensors round-trip bit-exactly.  Files
are written to a temporary sibling and renamed into place so a crashed
write never leaves a partial checkpoint behind.
"""

from __future__ import annotations

import json
import os
import zipfile

import numpy as np

from .config import TrainingConfig
from .errors import CheckpointError, ConfigError
from .extensional import ExtensionalParams
from .intensional import IntensionalParams
from .model import ModelState

FORMAT_VERSION = 1

_TENSORS = ("instances", "relations", "centers", "axes", "radii", "concept_vecs")


def save_checkpoint(state: ModelState, path: str) -> None:
    ext, intp = state.extensional, state.intensional
    payload = {
        "version": np.int64(FORMAT_VERSION),
        "config_json": np.str_(json.dumps(state.config.to_dict(), sort_keys=True)),
        "epoch": np.int64(state.epoch),
        "init_mode": np.str_(intp.init_mode),
        "zero_cos_events": np.int64(intp.zero_cos_events),
        "instances": ext.instances,
        "relations": ext.relations,
        "centers": ext.centers,
        "axes": ext.axes,
        "radii": ext.radii,
        "concept_vecs": intp.concept_vecs,
    }
    if intp.bridge is not None:
        payload["bridge"] = intp.bridge
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> ModelState:
    if not os.path.exists(path):
        raise CheckpointError(f"missing checkpoint: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            names = set(archive.files)
            required = {"version", "config_json", "epoch", "init_mode"} | set(_TENSORS)
            missing = required - names
            if missing:
                raise CheckpointError(
                    f"{path}: truncated checkpoint, missing {sorted(missing)}")
            version = int(archive["version"])
            if version != FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: format version {version}, expected {FORMAT_VERSION}")
            try:
                config = TrainingConfig.from_dict(json.loads(str(archive["config_json"])))
            except (json.JSONDecodeError, ConfigError) as exc:
                raise CheckpointError(f"{path}: bad embedded config: {exc}") from exc
            ext = ExtensionalParams(
                instances=archive["instances"],
                relations=archive["relations"],
                centers=archive["centers"],
                axes=archive["axes"],
                radii=archive["radii"],
            )
            intp = IntensionalParams(
                concept_vecs=archive["concept_vecs"],
                bridge=archive["bridge"] if "bridge" in names else None,
                init_mode=str(archive["init_mode"]),
                zero_cos_events=int(archive["zero_cos_events"]) if "zero_cos_events" in names else 0,
            )
            state = ModelState(extensional=ext, intensional=intp,
                               config=config, epoch=int(archive["epoch"]))
    except (zipfile.BadZipFile, OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    _check_shapes(state, path)
    return state


def _check_shapes(state: ModelState, path: str) -> None:
    d = state.config.d
    ext, intp = state.extensional, state.intensional
    for name, arr, cols in (
        ("instances", ext.instances, d),
        ("relations", ext.relations, d),
        ("centers", ext.centers, d),
        ("axes", ext.axes, d),
        ("concept_vecs", intp.concept_vecs, d),
    ):
        if arr.ndim != 2 or arr.shape[1] != cols:
            raise CheckpointError(f"{path}: tensor {name} has shape {arr.shape}, "
                                  f"expected (*, {cols})")
    if ext.radii.shape != (ext.centers.shape[0],):
        raise CheckpointError(f"{path}: radii shape {ext.radii.shape} mismatched")
    if (state.config.bridge == "MAT") != (intp.bridge is not None):
        raise CheckpointError(f"{path}: bridge tensor inconsistent with config")
    if intp.bridge is not None and intp.bridge.shape != (d, d):
        raise CheckpointError(f"{path}: bridge shape {intp.bridge.shape}, expected {(d, d)}")


def describe_checkpoint(path: str) -> dict:
    """Summarize a checkpoint without fully validating it (for inspection)."""
    state = load_checkpoint(path)
    ext, intp = state.extensional, state.intensional
    tensors = {
        "instances": ext.instances.shape,
        "relations": ext.relations.shape,
        "centers": ext.centers.shape,
        "axes": ext.axes.shape,
        "radii": ext.radii.shape,
        "concept_vecs": intp.concept_vecs.shape,
    }
    if intp.bridge is not None:
        tensors["bridge"] = intp.bridge.shape
    return {
        "version": FORMAT_VERSION,
        "epoch": state.epoch,
        "config": state.config.to_dict(),
        "init_mode": intp.init_mode,
        "zero_cos_events": intp.zero_cos_events,
        "tensors": tensors,
    }
