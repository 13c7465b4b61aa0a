"""Shared dataset value types and pixel scaling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class VideoSequence:
    """Frames plus ground-truth instance masks for one simulated episode.

    ``frames``: [T, H, W, 3] float32 in [-1, 1]. ``masks``: [T, H, W]
    uint8 with 0 = background and 1..num_objects = visible object id.
    """

    frames: np.ndarray
    masks: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError(f"frames must be [T, H, W, 3], got {self.frames.shape}")
        if self.masks.shape != self.frames.shape[:3]:
            raise ValueError(
                f"masks shape {self.masks.shape} does not match frames {self.frames.shape[:3]}"
            )


def scale_to_unit_interval(rgb_255):
    """Map 8-bit color values onto [-1, 1]: 0 -> -1, 127.5 -> 0, 255 -> 1."""
    return np.asarray(rgb_255, dtype=np.float32) * np.float32(2.0 / 255.0) - np.float32(1.0)
