"""Bouncing balls: three discs in a unit box with elastic collisions.

Each ball carries a fixed speed. A ball-ball contact exchanges the
velocity components along the line of centers (equal masses) and the
result is rescaled back to the fixed speed, so per-ball speed is an exact
invariant of the simulation; wall contacts reflect specularly. Frames are
rendered at 32x32 with 4x supersampled anti-aliasing.
"""

from __future__ import annotations

import numpy as np

from ..seeding import stream
from .palette import palette
from .types import VideoSequence, scale_to_unit_interval

NUM_BALLS = 3
RADIUS = 0.1
SPEED = 0.06          # box lengths per frame
SEQUENCE_LENGTH = 12
RESOLUTION = 32
SUBSTEPS = 4
SUPERSAMPLE = 4


def _resolve_ball_collisions(centers, velocities):
    n = centers.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            delta = centers[j] - centers[i]
            dist = float(np.hypot(delta[0], delta[1]))
            if dist >= 2 * RADIUS or dist == 0.0:
                continue
            normal = delta / dist
            approach = float(np.dot(velocities[i] - velocities[j], normal))
            if approach <= 0.0:
                # already separating; only push the overlap apart
                pass
            else:
                vi_n = float(np.dot(velocities[i], normal))
                vj_n = float(np.dot(velocities[j], normal))
                velocities[i] += (vj_n - vi_n) * normal
                velocities[j] += (vi_n - vj_n) * normal
                for k in (i, j):
                    norm = float(np.hypot(velocities[k][0], velocities[k][1]))
                    if norm < 1e-12:
                        # degenerate exchange; send the ball along the normal
                        velocities[k] = normal * (SPEED if k == j else -SPEED)
                    else:
                        velocities[k] *= SPEED / norm
            overlap = 2 * RADIUS - dist
            centers[i] -= 0.5 * overlap * normal
            centers[j] += 0.5 * overlap * normal


def _reflect_walls(centers, velocities):
    low, high = RADIUS, 1.0 - RADIUS
    for axis in (0, 1):
        below = centers[:, axis] < low
        centers[below, axis] = 2 * low - centers[below, axis]
        velocities[below, axis] = np.abs(velocities[below, axis])
        above = centers[:, axis] > high
        centers[above, axis] = 2 * high - centers[above, axis]
        velocities[above, axis] = -np.abs(velocities[above, axis])
    np.clip(centers, low, high, out=centers)


def simulate_balls(seed: int):
    """Trajectories (centers[T, n, 2], velocities[T, n, 2]) for one episode."""
    rng = stream(seed, "balls")
    centers = _sample_positions(rng)
    headings = rng.uniform(0.0, 2.0 * np.pi, size=NUM_BALLS)
    velocities = SPEED * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    all_centers = np.empty((SEQUENCE_LENGTH, NUM_BALLS, 2))
    all_velocities = np.empty((SEQUENCE_LENGTH, NUM_BALLS, 2))
    dt = 1.0 / SUBSTEPS
    for t in range(SEQUENCE_LENGTH):
        all_centers[t] = centers
        all_velocities[t] = velocities
        for _ in range(SUBSTEPS):
            centers = centers + velocities * dt
            _resolve_ball_collisions(centers, velocities)
            _reflect_walls(centers, velocities)
    return all_centers, all_velocities


def _sample_positions(rng):
    low, high = RADIUS, 1.0 - RADIUS
    while True:
        centers = rng.uniform(low, high, size=(NUM_BALLS, 2))
        diffs = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1)) + np.eye(NUM_BALLS)
        if dist.min() >= 2 * RADIUS:
            return centers


_SS = RESOLUTION * SUPERSAMPLE
_SS_COORDS = (np.arange(_SS) + 0.5) / _SS
_PIX_COORDS = (np.arange(RESOLUTION) + 0.5) / RESOLUTION


def render_balls_frame(centers, colors):
    """Anti-aliased frame in [-1, 1] plus a last-drawn-wins id mask."""
    img = np.zeros((_SS, _SS, 3), dtype=np.float32)
    mask = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    yy = _SS_COORDS[:, None]
    xx = _SS_COORDS[None, :]
    ym = _PIX_COORDS[:, None]
    xm = _PIX_COORDS[None, :]
    for k, (cx, cy) in enumerate(centers):
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= RADIUS**2
        img[inside] = np.asarray(colors[k], dtype=np.float32)
        mask[(xm - cx) ** 2 + (ym - cy) ** 2 <= RADIUS**2] = k + 1
    coarse = img.reshape(RESOLUTION, SUPERSAMPLE, RESOLUTION, SUPERSAMPLE, 3).mean(axis=(1, 3))
    return scale_to_unit_interval(coarse), mask


def bouncing_balls_sequence(seed: int, colors=None) -> VideoSequence:
    """One 12-frame episode. ``colors`` defaults to a palette drawn from the
    episode seed; dataset generation passes one shared palette instead."""
    if colors is None:
        offset = stream(seed, "balls-palette").random()
        colors = palette(NUM_BALLS, offset)
    centers, _ = simulate_balls(seed)
    frames = np.empty((SEQUENCE_LENGTH, RESOLUTION, RESOLUTION, 3), dtype=np.float32)
    masks = np.empty((SEQUENCE_LENGTH, RESOLUTION, RESOLUTION), dtype=np.uint8)
    for t in range(SEQUENCE_LENGTH):
        frames[t], masks[t] = render_balls_frame(centers[t], colors)
    return VideoSequence(
        frames=frames,
        masks=masks,
        metadata={
            "dataset": "balls",
            "seed": int(seed),
            "palette": [[int(v) for v in c] for c in colors],
        },
    )


def generate_balls_dataset(seed: int, num_sequences: int = 1000) -> list[VideoSequence]:
    """Episodes sharing one palette drawn from the dataset seed."""
    offset = stream(seed, "balls-palette").random()
    colors = palette(NUM_BALLS, offset)
    return [
        bouncing_balls_sequence(stream_seed, colors=colors)
        for stream_seed in _episode_seeds(seed, num_sequences)
    ]


def _episode_seeds(seed: int, count: int):
    # spread episodes across the seed space deterministically
    return [seed * 1_000_003 + i for i in range(count)]
