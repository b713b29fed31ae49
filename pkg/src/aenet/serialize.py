"""Parameter directories: one ``.aent`` file per tensor plus a JSON manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import RunConfig
from .model import ModelParams, init_params
from .numerics import SplitMix64
from .numerics.aent import read_aent, write_aent

MANIFEST = "manifest.json"


def save_params(directory, params: ModelParams) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, tensor, role in params.named_tensors():
        filename = f"{name}.aent"
        write_aent(d / filename, tensor.data)
        manifest[name] = {"file": filename, "shape": list(tensor.shape), "role": role}
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_params(directory, cfg: RunConfig) -> ModelParams:
    """Rebuild the parameter structure for ``cfg`` and fill it from disk.

    Stored values are float32, so a loaded model reproduces the saved one to
    single precision rather than bit for bit.
    """
    d = Path(directory)
    manifest = json.loads((d / MANIFEST).read_text())
    params = init_params(cfg, SplitMix64(0))
    expected = {name for name, _, _ in params.named_tensors()}
    if expected != set(manifest):
        missing = sorted(expected - set(manifest))
        extra = sorted(set(manifest) - expected)
        raise ValueError(f"parameter set does not match config (missing {missing}, extra {extra})")
    for name, tensor, _ in params.named_tensors():
        entry = manifest[name]
        data = read_aent(d / entry["file"])
        if list(data.shape) != list(tensor.shape):
            raise ValueError(f"{name}: stored shape {data.shape} != expected {tensor.shape}")
        tensor.data[...] = data.astype(np.float64)
    return params
