"""On-disk dataset container: manifest.json + raw little-endian blobs.

Layout: a directory with ``manifest.json`` (dataset name, counts, shapes,
dtypes, palette, split boundary, per-sequence metadata), ``frames.f32le``
and ``masks.u8``, both row-major. Reading a corrupt or truncated container
raises FormatError with the failing byte position; no partial result is
returned.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..params import FormatError
from .types import VideoSequence

MANIFEST_NAME = "manifest.json"
FRAMES_NAME = "frames.f32le"
MASKS_NAME = "masks.u8"


def dataset_write(sequences: list[VideoSequence], path: str, eval_count: int = 0):
    if not sequences:
        raise ValueError("refusing to write an empty dataset")
    shape = sequences[0].frames.shape
    for i, seq in enumerate(sequences):
        if seq.frames.shape != shape:
            raise ValueError(
                f"sequence {i} shape {seq.frames.shape} differs from {shape}"
            )
    if not 0 <= eval_count <= len(sequences):
        raise ValueError(f"eval_count={eval_count} out of range")
    os.makedirs(path, exist_ok=True)
    frames = np.stack([s.frames for s in sequences]).astype("<f4", copy=False)
    masks = np.stack([s.masks for s in sequences]).astype("u1", copy=False)
    manifest = {
        "format": "setcon-dataset-v1",
        "dataset": sequences[0].metadata.get("dataset", "unknown"),
        "num_sequences": len(sequences),
        "sequence_shape": list(shape),
        "frames_dtype": "float32",
        "masks_dtype": "uint8",
        "frames_bytes": int(frames.nbytes),
        "masks_bytes": int(masks.nbytes),
        "eval_count": eval_count,
        "palette": sequences[0].metadata.get("palette"),
        "sequence_metadata": [s.metadata for s in sequences],
    }
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    with open(os.path.join(path, FRAMES_NAME), "wb") as fh:
        fh.write(frames.tobytes())
    with open(os.path.join(path, MASKS_NAME), "wb") as fh:
        fh.write(masks.tobytes())


def dataset_read(path: str) -> tuple[list[VideoSequence], dict]:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise FormatError(f"unreadable dataset manifest at {manifest_path}: {err}") from err

    num = manifest["num_sequences"]
    shape = tuple(manifest["sequence_shape"])
    frames_blob = _read_blob(os.path.join(path, FRAMES_NAME), manifest["frames_bytes"])
    masks_blob = _read_blob(os.path.join(path, MASKS_NAME), manifest["masks_bytes"])
    frames = np.frombuffer(frames_blob, dtype="<f4").reshape((num,) + shape)
    masks = np.frombuffer(masks_blob, dtype="u1").reshape((num,) + shape[:-1])
    metas = manifest.get("sequence_metadata") or [{} for _ in range(num)]
    sequences = [
        VideoSequence(
            frames=frames[i].astype(np.float32, copy=True),
            masks=masks[i].copy(),
            metadata=metas[i],
        )
        for i in range(num)
    ]
    return sequences, manifest


def split_train_eval(sequences, manifest):
    """The last ``eval_count`` sequences form the held-out evaluation split."""
    eval_count = manifest.get("eval_count", 0)
    if eval_count == 0:
        return sequences, []
    return sequences[:-eval_count], sequences[-eval_count:]


def _read_blob(path: str, expected_bytes: int) -> bytes:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) != expected_bytes:
        raise FormatError(
            f"{os.path.basename(path)} size mismatch at byte "
            f"{min(len(blob), expected_bytes)}: expected {expected_bytes}, found {len(blob)}"
        )
    return blob
