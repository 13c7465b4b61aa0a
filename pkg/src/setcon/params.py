"""Named parameter collections and their on-disk checkpoint format.

A checkpoint is a directory holding ``manifest.json`` (UTF-8 text listing
name, shape, dtype, byte offset and byte length per tensor, plus free-form
metadata) and ``params.bin``, a single little-endian raw blob. Reload is
bit-exact.
"""

from __future__ import annotations

import json
import os
from typing import Iterator

import numpy as np

from .autodiff import Tensor

ROLES = ("weight", "bias", "gain", "offset", "slot_init", "moment")

_DTYPE_CODES = {"float32": "<f4", "float64": "<f8"}


class StructuralError(ValueError):
    """Raised when two trees that must be congruent are not."""


class FormatError(ValueError):
    """Raised on a corrupt or truncated checkpoint/container file."""


class ParameterTree:
    """Ordered map from dotted names to tensors, with per-entry role tags.

    Iteration order is lexicographic in the name, independent of insertion
    order, so reductions and serialization are deterministic.
    """

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}
        self._roles: dict[str, str] = {}

    def add(self, name: str, value, role: str = "weight") -> Tensor:
        if name in self._tensors:
            raise StructuralError(f"duplicate parameter name: {name}")
        if role not in ROLES:
            raise StructuralError(f"unknown role {role!r} for {name}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        self._tensors[name] = t
        self._roles[name] = role
        return t

    def __contains__(self, name):
        return name in self._tensors

    def __getitem__(self, name) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise StructuralError(f"missing parameter: {name}") from None

    def __len__(self):
        return len(self._tensors)

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def role(self, name) -> str:
        return self._roles[name]

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._tensors[name]

    def zero_grads(self):
        for t in self._tensors.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Collected gradients after a backward pass; zeros where absent."""
        out = {}
        for name, t in self.items():
            out[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
        return out

    def copy_with(self, new_data: dict[str, np.ndarray]) -> "ParameterTree":
        """A fresh tree with the same names/roles and replaced arrays."""
        if sorted(new_data) != self.names():
            raise StructuralError("replacement data does not match tree names")
        tree = ParameterTree()
        for name in self.names():
            arr = new_data[name]
            if arr.shape != self._tensors[name].data.shape:
                raise StructuralError(
                    f"replacement shape {arr.shape} does not match {name} "
                    f"{self._tensors[name].data.shape}"
                )
            tree.add(name, Tensor(arr), self._roles[name])
        return tree

    def num_values(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def merge_trees(prefix_trees: dict[str, ParameterTree]) -> ParameterTree:
    """Join several trees under name prefixes (used for checkpoints)."""
    merged = ParameterTree()
    for prefix, tree in prefix_trees.items():
        for name, t in tree.items():
            merged.add(f"{prefix}.{name}" if prefix else name, Tensor(t.data), tree.role(name))
    return merged


def split_tree(tree: ParameterTree, prefix: str) -> ParameterTree:
    """Extract the subtree under ``prefix.`` with the prefix stripped."""
    out = ParameterTree()
    dotted = prefix + "."
    for name, t in tree.items():
        if name.startswith(dotted):
            out.add(name[len(dotted):], Tensor(t.data), tree.role(name))
    return out


MANIFEST_NAME = "manifest.json"
BLOB_NAME = "params.bin"


def save_checkpoint(path: str, tree: ParameterTree, metadata: dict | None = None):
    """Write manifest + little-endian blob; overwrites existing files."""
    os.makedirs(path, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, t in tree.items():
        dtype = str(t.data.dtype)
        if dtype not in _DTYPE_CODES:
            raise FormatError(f"unsupported dtype {dtype} for {name}")
        raw = np.ascontiguousarray(t.data).astype(_DTYPE_CODES[dtype], copy=False).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(t.data.shape),
                "dtype": dtype,
                "role": tree.role(name),
                "byte_offset": offset,
                "byte_length": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format": "setcon-checkpoint-v1",
        "blob": BLOB_NAME,
        "total_bytes": offset,
        "tensors": entries,
        "metadata": metadata or {},
    }
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    with open(os.path.join(path, BLOB_NAME), "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path: str) -> tuple[ParameterTree, dict]:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise FormatError(f"unreadable checkpoint manifest at {manifest_path}: {err}") from err
    blob_path = os.path.join(path, manifest.get("blob", BLOB_NAME))
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    expected = manifest.get("total_bytes", 0)
    if len(blob) != expected:
        raise FormatError(
            f"checkpoint blob size mismatch at byte {min(len(blob), expected)}: "
            f"manifest declares {expected} bytes, file holds {len(blob)}"
        )
    tree = ParameterTree()
    for entry in manifest["tensors"]:
        start = entry["byte_offset"]
        end = start + entry["byte_length"]
        if end > len(blob):
            raise FormatError(
                f"checkpoint entry {entry['name']} overruns blob at byte {start}"
            )
        code = _DTYPE_CODES[entry["dtype"]]
        arr = np.frombuffer(blob[start:end], dtype=code).reshape(entry["shape"])
        arr = arr.astype(entry["dtype"], copy=True)
        tree.add(entry["name"], Tensor(arr), entry.get("role", "weight"))
    return tree, manifest.get("metadata", {})
