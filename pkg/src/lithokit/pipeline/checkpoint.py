"""Self-describing, byte-stable checkpoint container.

Layout: 4-byte magic, little-endian u32 format version, u64 header
length, a sorted-key JSON header (kind, config echo, extra metadata,
tensor directory), then the raw little-endian tensor blobs concatenated
in name-sorted order.  No pickling, no timestamps — writing the same
state twice produces identical bytes, which is what makes the frozen-
generator and round-trip contracts checkable by hashing.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np
import torch

from ..errors import InputError

MAGIC = b"LKCK"
FORMAT_VERSION = 1


@dataclass
class CheckpointData:
    kind: str  # "generator" | "detector" | "joint"
    config: dict
    tensors: Dict[str, torch.Tensor]
    extra: dict = field(default_factory=dict)


def _to_le_array(t: torch.Tensor) -> np.ndarray:
    arr = t.detach().cpu().contiguous().numpy()
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    return arr


def save_checkpoint(path, kind: str, config: dict,
                    tensors: Mapping[str, torch.Tensor],
                    extra: dict | None = None) -> None:
    names = sorted(tensors)
    entries = []
    blobs = []
    for name in names:
        arr = _to_le_array(tensors[name])
        blob = arr.tobytes()
        entries.append({
            "name": name,
            "dtype": arr.dtype.str,
            "shape": list(arr.shape),
            "nbytes": len(blob),
        })
        blobs.append(blob)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "extra": extra or {},
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path) -> CheckpointData:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise InputError(f"{path} is not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise InputError(f"unsupported checkpoint format version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        tensors: Dict[str, torch.Tensor] = {}
        for entry in header["tensors"]:
            buf = fh.read(entry["nbytes"])
            arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"]))
            arr = arr.reshape(entry["shape"]).copy()
            tensors[entry["name"]] = torch.from_numpy(arr)
    return CheckpointData(kind=header["kind"], config=header["config"],
                          tensors=tensors, extra=header["extra"])


def weights_hash(tensors: Mapping[str, torch.Tensor]) -> str:
    """Order-independent digest of named tensors (name, dtype, shape, bytes)."""
    h = hashlib.sha256()
    for name in sorted(tensors):
        arr = _to_le_array(tensors[name])
        h.update(name.encode("utf-8"))
        h.update(arr.dtype.str.encode("ascii"))
        h.update(str(arr.shape).encode("ascii"))
        h.update(arr.tobytes())
    return h.hexdigest()


# --- optimizer state <-> named tensors ---

def pack_optimizer(opt: torch.optim.Optimizer):
    """Split an optimizer state dict into (tensor dict, JSON-safe meta)."""
    sd = opt.state_dict()
    tensors: Dict[str, torch.Tensor] = {}
    scalars: Dict[str, object] = {}
    for idx, state in sd["state"].items():
        for key, value in state.items():
            if torch.is_tensor(value):
                tensors[f"opt.{idx}.{key}"] = value
            else:
                scalars[f"{idx}.{key}"] = value
    meta = {"param_groups": sd["param_groups"], "scalars": scalars}
    return tensors, meta


def unpack_optimizer(opt: torch.optim.Optimizer, tensors: Mapping[str, torch.Tensor],
                     meta: dict) -> None:
    state: Dict[int, dict] = {}
    for name, tensor in tensors.items():
        if not name.startswith("opt."):
            continue
        _, idx, key = name.split(".", 2)
        state.setdefault(int(idx), {})[key] = tensor
    for flat, value in meta.get("scalars", {}).items():
        idx, key = flat.split(".", 1)
        state.setdefault(int(idx), {})[key] = value
    opt.load_state_dict({"state": state, "param_groups": meta["param_groups"]})
