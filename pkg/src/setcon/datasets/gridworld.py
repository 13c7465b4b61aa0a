"""Multi-object gridworld: single colored pixels moving on a 5x5 black plane.

Objects move one cell per step along a fixed heading and reflect at the
boundary (direction flips and the object moves one cell the other way,
so it never stalls). Objects pass through each other; when several share
a cell, the one latest in that frame's randomly resampled z-order is the
visible one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..seeding import stream
from .palette import palette
from .types import VideoSequence, scale_to_unit_interval

GRID_SIZE = 5
SEQUENCE_LENGTH = 8
NUM_DIRECTIONS = 4

# up, down, left, right as (row, col) deltas
DIRECTION_VECTORS = np.array([[-1, 0], [1, 0], [0, -1], [0, 1]])
OPPOSITE_DIRECTION = np.array([1, 0, 3, 2])
DIRECTION_NAMES = ("up", "down", "left", "right")


@dataclass
class GridWorldState:
    positions: np.ndarray   # [num_objects, 2] int, (row, col) in {0..4}^2
    directions: np.ndarray  # [num_objects] int, indices into DIRECTION_VECTORS
    colors: np.ndarray      # [num_objects, 3] uint8
    z_order: np.ndarray     # [num_objects] permutation, resampled per frame


def gridworld_step(positions: np.ndarray, directions: np.ndarray):
    """Advance every object one cell; reflect-and-move at the boundary."""
    moved = positions + DIRECTION_VECTORS[directions]
    out = (moved < 0) | (moved >= GRID_SIZE)
    hits = out.any(axis=1)
    new_dirs = np.where(hits, OPPOSITE_DIRECTION[directions], directions)
    new_pos = positions + DIRECTION_VECTORS[new_dirs]
    return new_pos, new_dirs


def render_gridworld_frame(positions, z_order, colors):
    """Paint objects in z-order (later entries overwrite earlier ones)."""
    frame = np.full((GRID_SIZE, GRID_SIZE, 3), -1.0, dtype=np.float32)
    mask = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    scaled = scale_to_unit_interval(colors)
    for obj in z_order:
        r, c = positions[obj]
        frame[r, c] = scaled[obj]
        mask[r, c] = obj + 1
    return frame, mask


def gridworld_state_space_size(num_objects: int = 3) -> int:
    """Ordered draws of distinct (position, direction) states."""
    total = GRID_SIZE * GRID_SIZE * NUM_DIRECTIONS
    return math.perm(total, num_objects)


def sample_gridworld_episode(seed: int, num_colors: int = 3, num_objects: int = 3):
    """Draw the stochastic inputs of one episode: initial state and the
    per-frame z-orders. Objects get pairwise-distinct (position, direction)
    pairs; each palette color is used at most once (exactly once when
    num_colors == num_objects)."""
    total_states = GRID_SIZE * GRID_SIZE * NUM_DIRECTIONS
    if num_objects > total_states:
        raise ValueError(
            f"cannot place {num_objects} objects in {total_states} distinct states"
        )
    if num_colors < num_objects:
        raise ValueError(
            f"num_colors={num_colors} cannot cover {num_objects} objects without repeats"
        )
    rng = stream(seed, "gridworld")
    states = rng.choice(total_states, size=num_objects, replace=False)
    positions = np.stack([states // NUM_DIRECTIONS // GRID_SIZE,
                          states // NUM_DIRECTIONS % GRID_SIZE], axis=1)
    directions = states % NUM_DIRECTIONS
    offset = rng.random()
    color_table = np.array(palette(num_colors, offset), dtype=np.uint8)
    color_ids = rng.choice(num_colors, size=num_objects, replace=False)
    colors = color_table[color_ids]
    z_orders = np.stack([rng.permutation(num_objects) for _ in range(SEQUENCE_LENGTH)])
    return positions, directions, colors, z_orders, offset


def roll_gridworld(positions, directions, steps: int):
    """Trajectories [steps, n, 2] and [steps, n] starting from the given state."""
    all_pos = np.empty((steps,) + positions.shape, dtype=positions.dtype)
    all_dirs = np.empty((steps,) + directions.shape, dtype=directions.dtype)
    for t in range(steps):
        all_pos[t] = positions
        all_dirs[t] = directions
        positions, directions = gridworld_step(positions, directions)
    return all_pos, all_dirs


def gridworld_sequence(seed: int, num_colors: int = 3, num_objects: int = 3) -> VideoSequence:
    positions, directions, colors, z_orders, offset = sample_gridworld_episode(
        seed, num_colors=num_colors, num_objects=num_objects
    )
    all_pos, _ = roll_gridworld(positions, directions, SEQUENCE_LENGTH)
    frames = np.empty((SEQUENCE_LENGTH, GRID_SIZE, GRID_SIZE, 3), dtype=np.float32)
    masks = np.empty((SEQUENCE_LENGTH, GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    for t in range(SEQUENCE_LENGTH):
        frames[t], masks[t] = render_gridworld_frame(all_pos[t], z_orders[t], colors)
    return VideoSequence(
        frames=frames,
        masks=masks,
        metadata={
            "dataset": "gridworld",
            "seed": int(seed),
            "palette": [[int(v) for v in c] for c in colors],
            "palette_offset": float(offset),
        },
    )


def gridworld_batch(seeds, num_colors: int = 3, num_objects: int = 3) -> np.ndarray:
    """Stacked frames [B, T, H, W, 3] for a batch of episode seeds."""
    return np.stack(
        [gridworld_sequence(s, num_colors, num_objects).frames for s in seeds]
    )
