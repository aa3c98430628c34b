"""Versioned binary array container: ``arrays.bin`` (raw little-endian) + ``manifest.json``."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import torch

CONTAINER_VERSION = 1


def tensors_to_arrays(prefix: str, state: Dict[str, torch.Tensor]) -> Dict[str, np.ndarray]:
    return {f"{prefix}/{k}": v.detach().cpu().numpy() for k, v in state.items()
            if isinstance(v, torch.Tensor)}


def arrays_to_tensors(prefix: str, arrays: Dict[str, np.ndarray]) -> Dict[str, torch.Tensor]:
    cut = len(prefix) + 1
    return {k[cut:]: torch.from_numpy(np.array(v)) for k, v in arrays.items()
            if k.startswith(prefix + "/")}


def write_container(directory, arrays: Dict[str, np.ndarray], meta: dict) -> None:
    """Arrays are written in sorted-name order so equal inputs give identical bytes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(directory / "arrays.bin", "wb") as fh:
        for name in sorted(arrays):
            a = np.ascontiguousarray(arrays[name])
            dtype = a.dtype.newbyteorder("<")
            raw = a.astype(dtype, copy=False).tobytes()
            fh.write(raw)
            entries.append({"name": name, "dtype": dtype.str, "shape": list(a.shape),
                            "offset": offset, "nbytes": len(raw)})
            offset += len(raw)
    manifest = {"version": CONTAINER_VERSION, "meta": meta, "arrays": entries}
    (directory / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))


def read_container(directory) -> Tuple[Dict[str, np.ndarray], dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("version") != CONTAINER_VERSION:
        raise ValueError(f"unsupported container version {manifest.get('version')}")
    blob = (directory / "arrays.bin").read_bytes()
    arrays = {}
    for e in manifest["arrays"]:
        chunk = blob[e["offset"]:e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(chunk, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return arrays, manifest["meta"]
