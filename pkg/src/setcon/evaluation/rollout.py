"""Multi-step future prediction by iterating the transition model."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..model.network import ModelSettings, encode_backbone, fm_mlp_slots, slot_attention, slot_init_values, transition
from .decoder import broadcast_decode
from .metrics import mse

MAX_ROLLOUT_STEPS = 5


def rollout(params, s_prev, s_curr, k: int, max_steps: int = MAX_ROLLOUT_STEPS):
    """Predict ``k`` steps ahead from two encoded context slot sets.

    Step 1 consumes (s_prev, s_curr); each later step feeds the newest
    prediction back as the most recent state, the older context element
    dropping out. Returns the per-step slot sets.
    """
    if k < 1:
        raise ValueError(f"rollout needs k >= 1, got {k}")
    if k > max_steps:
        raise ValueError(f"rollout supports up to k={max_steps} steps, got {k}")
    older, newer = ad.as_tensor(s_prev), ad.as_tensor(s_curr)
    steps = []
    for _ in range(k):
        pred = transition(older, newer, params)
        steps.append(pred)
        older, newer = newer, pred
    return steps


def encode_frames(frames, params, settings: ModelSettings, slot_rng=None):
    """Slots [B, T, K, D] for a stack of frames (no transition applied)."""
    frames = ad.as_tensor(frames)
    b, t = frames.shape[:2]
    flat = ad.reshape(frames, (b * t,) + frames.shape[2:])
    feats = encode_backbone(flat, params, settings.frame_hw)
    if settings.encoder == "slot_attention":
        init = slot_init_values(settings.slot_init, params, settings.num_slots, rng=slot_rng)
        slots_flat, _ = slot_attention(feats, init, settings.attention_iterations, params)
    else:
        slots_flat = fm_mlp_slots(feats, params)
    return ad.reshape(slots_flat, (b, t, settings.num_slots, settings.slot_dim))


def rollout_mse(frames, params, dec_params, settings: ModelSettings, k: int,
                slot_rng=None):
    """Per-step reconstruction MSE for predictions rolled out from the
    first two frames. Prediction i targets frame i+2, so T >= k+2.

    Returns (per-step MSE list, per-step composite arrays [B, H, W, 3]).
    """
    frames = ad.as_tensor(frames)
    b, t = frames.shape[:2]
    if t < k + 2:
        raise ValueError(f"rollout of k={k} steps needs at least {k + 2} frames, got {t}")
    context = encode_frames(frames[:, :2], params, settings, slot_rng=slot_rng)
    preds = rollout(params, context[:, 0], context[:, 1], k)
    errors = []
    composites = []
    for i, pred in enumerate(preds):
        out = broadcast_decode(pred, dec_params, settings.frame_hw)
        target = frames.data[:, i + 2]
        errors.append(mse(out.composite.data, target))
        composites.append(np.asarray(out.composite.data))
    return errors, composites
