"""Counter-based random streams.

One root seed is split into named streams (data, init, slot-noise, ...)
by hashing (root, stream, counter) into a Philox key. Streams are pure
functions of their arguments, so training can be resumed at any step
without replaying or persisting generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(root_seed: int, name: str, counter: int = 0) -> int:
    digest = hashlib.sha256(f"{root_seed}/{name}/{counter}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream(root_seed: int, name: str, counter: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(root_seed, name, counter)))
