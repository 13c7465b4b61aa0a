"""Slot-based video encoder: backbone, slot extraction, per-slot dynamics
and permutation-invariant set aggregation.

All functions are pure in (inputs, parameters) and operate on batched
tensors; batch elements flow through a single fused computation so the
tape stays short.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import autodiff as ad
from ..autodiff import DimensionError, Tensor
from ..params import ParameterTree


@dataclass(frozen=True)
class ModelSettings:
    encoder: str = "slot_attention"      # slot_attention | fm_mlp
    num_slots: int = 4
    slot_dim: int = 16
    enc_dim: int = 32
    hidden: int = 128
    slot_init: str = "learned"           # learned | random
    attention_iterations: int = 1
    frame_hw: tuple[int, int] = (5, 5)

    @property
    def num_pixels(self) -> int:
        return self.frame_hw[0] * self.frame_hw[1]


# --- parameter construction ----------------------------------------------

def _uniform(rng, fan_in, shape, dtype):
    limit = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _add_linear(tree, rng, name, n_in, n_out, dtype):
    tree.add(f"{name}.weight", Tensor(_uniform(rng, n_in, (n_in, n_out), dtype)), "weight")
    tree.add(f"{name}.bias", Tensor(np.zeros(n_out, dtype=dtype)), "bias")


def _add_norm(tree, name, width, dtype):
    tree.add(f"{name}.gain", Tensor(np.ones(width, dtype=dtype)), "gain")
    tree.add(f"{name}.offset", Tensor(np.zeros(width, dtype=dtype)), "offset")


def _add_gru(tree, rng, name, width, dtype):
    for gate in ("z", "r", "h"):
        tree.add(f"{name}.w{gate}", Tensor(_uniform(rng, width, (width, width), dtype)), "weight")
        tree.add(f"{name}.u{gate}", Tensor(_uniform(rng, width, (width, width), dtype)), "weight")
        tree.add(f"{name}.b{gate}", Tensor(np.zeros(width, dtype=dtype)), "bias")


def build_model_params(settings: ModelSettings, rng, dtype=np.float32) -> ParameterTree:
    tree = ParameterTree()
    enc, d, hidden, k = settings.enc_dim, settings.slot_dim, settings.hidden, settings.num_slots

    _add_linear(tree, rng, "backbone.mlp1.fc1", 3, enc, dtype)
    _add_linear(tree, rng, "backbone.mlp1.fc2", enc, enc, dtype)
    _add_linear(tree, rng, "backbone.pos", 2, enc, dtype)
    _add_norm(tree, "backbone.norm", enc, dtype)
    _add_linear(tree, rng, "backbone.mlp2.fc1", enc, enc, dtype)
    _add_linear(tree, rng, "backbone.mlp2.fc2", enc, enc, dtype)

    if settings.encoder == "slot_attention":
        _add_norm(tree, "attn.input_norm", enc, dtype)
        _add_norm(tree, "attn.slot_norm", d, dtype)
        _add_linear(tree, rng, "attn.key", enc, d, dtype)
        _add_linear(tree, rng, "attn.query", d, d, dtype)
        _add_linear(tree, rng, "attn.value", enc, d, dtype)
        _add_gru(tree, rng, "attn.gru", d, dtype)
        _add_norm(tree, "attn.mlp_norm", d, dtype)
        _add_linear(tree, rng, "attn.mlp.fc1", d, hidden, dtype)
        _add_linear(tree, rng, "attn.mlp.fc2", hidden, d, dtype)
        if settings.slot_init == "learned":
            init = rng.standard_normal((k, d)) / math.sqrt(d)
            tree.add("slots.init", Tensor(init.astype(dtype)), "slot_init")
        elif settings.slot_init == "random":
            mu = rng.standard_normal(d) / math.sqrt(d)
            tree.add("slots.mu", Tensor(mu.astype(dtype)), "slot_init")
            tree.add("slots.sigma", Tensor(np.full(d, 1.0 / math.sqrt(d), dtype=dtype)), "slot_init")
        else:
            raise ValueError(f"unknown slot_init mode: {settings.slot_init}")
    elif settings.encoder == "fm_mlp":
        _add_linear(tree, rng, "fm.proj", enc, k, dtype)
        _add_linear(tree, rng, "fm.mlp.fc1", settings.num_pixels, hidden, dtype)
        _add_linear(tree, rng, "fm.mlp.fc2", hidden, d, dtype)
    else:
        raise ValueError(f"unknown encoder: {settings.encoder}")

    _add_linear(tree, rng, "transition.down", 3 * d, hidden, dtype)
    _add_norm(tree, "transition.norm", hidden, dtype)
    _add_linear(tree, rng, "transition.out", hidden, d, dtype)

    _add_linear(tree, rng, "set_encoder.inner.fc1", d, hidden, dtype)
    _add_linear(tree, rng, "set_encoder.inner.fc2", hidden, d, dtype)
    _add_norm(tree, "set_encoder.norm", d, dtype)
    _add_linear(tree, rng, "set_encoder.outer.fc1", d, hidden, dtype)
    _add_linear(tree, rng, "set_encoder.outer.fc2", hidden, d, dtype)
    return tree


# --- building blocks ------------------------------------------------------

@lru_cache(maxsize=8)
def _ramp_array(h: int, w: int, dtype: str) -> np.ndarray:
    rows = np.linspace(0.0, 1.0, h) if h > 1 else np.zeros(1)
    cols = np.linspace(0.0, 1.0, w) if w > 1 else np.zeros(1)
    grid = np.stack(np.meshgrid(rows, cols, indexing="ij"), axis=-1)
    return grid.reshape(h * w, 2).astype(dtype)


def position_ramp(h: int, w: int, dtype=np.float32) -> Tensor:
    """Constant [N, 2] embedding running 0..1 along each image dimension."""
    return ad.constant(_ramp_array(h, w, np.dtype(dtype).name))


def _mlp(x, params, prefix, activation=ad.relu):
    y = ad.linear(x, params[f"{prefix}.fc1.weight"], params[f"{prefix}.fc1.bias"])
    y = activation(y)
    return ad.linear(y, params[f"{prefix}.fc2.weight"], params[f"{prefix}.fc2.bias"])


def _norm(x, params, prefix):
    return ad.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.offset"])


def encode_backbone(x, params: ParameterTree, frame_hw) -> Tensor:
    """Per-pixel features [..., N, enc_dim] from frames [..., H, W, 3]."""
    x = ad.as_tensor(x)
    h, w = frame_hw
    if x.shape[-3:] != (h, w, 3):
        raise DimensionError(
            f"encode_backbone: expected frames [..., {h}, {w}, 3], got {x.shape}"
        )
    lead = x.shape[:-3]
    flat = ad.reshape(x, lead + (h * w, 3))
    feats = _mlp(flat, params, "backbone.mlp1")
    pos = ad.linear(position_ramp(h, w, x.dtype), params["backbone.pos.weight"],
                    params["backbone.pos.bias"])
    merged = feats + pos
    return _mlp(_norm(merged, params, "backbone.norm"), params, "backbone.mlp2")


def slot_init_values(mode: str, params: ParameterTree, num_slots: int, rng=None) -> Tensor:
    """Initial slot matrix [K, D]: the learned per-slot rows, or mu + eps*sigma
    with shared mu/sigma and fresh unit-normal noise per call."""
    if mode == "learned":
        return params["slots.init"]
    if mode == "random":
        if rng is None:
            raise ValueError("random slot initialization needs a random stream")
        mu, sigma = params["slots.mu"], params["slots.sigma"]
        eps = ad.constant(rng.standard_normal((num_slots, mu.shape[0])).astype(mu.dtype))
        return ad.reshape(mu, (1, -1)) + eps * ad.reshape(sigma, (1, -1))
    raise ValueError(f"unknown slot_init mode: {mode}")


def slot_attention(h, init_slots, iterations: int, params: ParameterTree):
    """Iterative slot competition over pixels.

    ``h`` is [..., N, enc_dim]; ``init_slots`` is [..., K, D] (or [K, D],
    broadcast over the batch). Returns the final slots and the last
    attention map [..., N, K], each pixel row a distribution over slots.
    """
    init_slots = ad.as_tensor(init_slots)
    k_slots = init_slots.shape[-2]
    if k_slots < 1:
        raise ValueError("slot_attention needs at least one slot")
    if iterations < 1:
        raise ValueError("slot_attention needs at least one iteration")
    h_n = _norm(h, params, "attn.input_norm")
    keys = ad.linear(h_n, params["attn.key.weight"], params["attn.key.bias"])
    values = ad.linear(h_n, params["attn.value.weight"], params["attn.value.bias"])
    d = keys.shape[-1]
    if init_slots.ndim < h.ndim:
        init_slots = ad.broadcast_to(
            ad.reshape(init_slots, (1,) * (h.ndim - init_slots.ndim) + init_slots.shape),
            h.shape[:-2] + (k_slots, init_slots.shape[-1]),
        )
    slots = init_slots
    attn = None
    scale = 1.0 / math.sqrt(d)
    gru = {name: params[f"attn.gru.{name}"]
           for name in ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")}
    for _ in range(iterations):
        queries = ad.linear(_norm(slots, params, "attn.slot_norm"),
                            params["attn.query.weight"], params["attn.query.bias"])
        logits = ad.matmul(keys, ad.swap_axes(queries, -1, -2)) * scale
        attn = ad.softmax(logits, axis=-1)                      # over slots
        weights = attn / ad.tsum(attn, axis=-2, keepdims=True)  # over pixels
        updates = ad.matmul(ad.swap_axes(weights, -1, -2), values)
        slots = ad.gru_cell(slots, updates, **gru)
        slots = slots + _mlp(_norm(slots, params, "attn.mlp_norm"), params, "attn.mlp")
    return slots, attn


def fm_mlp_slots(h, params: ParameterTree) -> Tensor:
    """Feature-map slots: a per-pixel linear map to K channels, each channel
    reshaped into one slot vector and pushed through a shared MLP."""
    h = ad.as_tensor(h)
    expected_n = params["fm.mlp.fc1.weight"].shape[0]
    if h.shape[-2] != expected_n:
        raise DimensionError(
            f"fm_mlp_slots: flattened frame has {h.shape[-2]} pixels, "
            f"parameters were built for {expected_n}"
        )
    channels = ad.linear(h, params["fm.proj.weight"], params["fm.proj.bias"])
    per_slot = ad.swap_axes(channels, -1, -2)  # [..., K, N]
    return _mlp(per_slot, params, "fm.mlp")


def transition(s_prev, s_curr, params: ParameterTree) -> Tensor:
    """Residual per-slot prediction of the next step from two context steps."""
    s_prev, s_curr = ad.as_tensor(s_prev), ad.as_tensor(s_curr)
    if s_prev.shape != s_curr.shape:
        raise DimensionError(
            f"transition: context shapes differ, {s_prev.shape} vs {s_curr.shape}"
        )
    stacked = ad.concat([s_prev, s_curr, s_curr - s_prev], axis=-1)
    y = ad.linear(stacked, params["transition.down.weight"], params["transition.down.bias"])
    y = _norm(y, params, "transition.norm")
    y = ad.linear(y, params["transition.out.weight"], params["transition.out.bias"])
    return s_curr + y


def set_encode(slots, params: ParameterTree) -> Tensor:
    """Order-invariant scene embedding: sum slot encodings, normalize, map."""
    inner = _mlp(slots, params, "set_encoder.inner")
    pooled = ad.tsum(inner, axis=-2)
    return _mlp(_norm(pooled, params, "set_encoder.norm"), params, "set_encoder.outer")


@dataclass
class SequenceOutputs:
    slots: Tensor            # [B, T, K, D]
    preds: Tensor            # [B, T-2, K, D]; preds[:, i] targets frame i+2
    attention: Tensor | None  # [B, T, N, K] for the attention encoder
    slot_embeds: Tensor      # [B, T, D]
    pred_embeds: Tensor      # [B, T-2, D]


def forward_sequence(frames, params: ParameterTree, settings: ModelSettings,
                     slot_rng=None) -> SequenceOutputs:
    """Encode every frame to slots, predict one step ahead for every
    adjacent pair, and aggregate both into scene embeddings."""
    frames = ad.as_tensor(frames)
    if frames.ndim != 5:
        raise DimensionError(f"forward_sequence: frames must be [B, T, H, W, 3], got {frames.shape}")
    b, t = frames.shape[:2]
    if t < 3:
        raise ValueError(f"forward_sequence needs T >= 3 frames, got {t}")
    h, w = settings.frame_hw
    k, d = settings.num_slots, settings.slot_dim

    flat = ad.reshape(frames, (b * t,) + frames.shape[2:])
    feats = encode_backbone(flat, params, (h, w))
    if settings.encoder == "slot_attention":
        init = slot_init_values(settings.slot_init, params, k, rng=slot_rng)
        slots_flat, attn_flat = slot_attention(
            feats, init, settings.attention_iterations, params
        )
        attention = ad.reshape(attn_flat, (b, t) + attn_flat.shape[1:])
    elif settings.encoder == "fm_mlp":
        slots_flat = fm_mlp_slots(feats, params)
        attention = None
    else:
        raise ValueError(f"unknown encoder: {settings.encoder}")

    slots = ad.reshape(slots_flat, (b, t, k, d))
    preds = transition(slots[:, :-2], slots[:, 1:-1], params)
    slot_embeds = set_encode(slots, params)
    pred_embeds = set_encode(preds, params)
    return SequenceOutputs(slots=slots, preds=preds, attention=attention,
                           slot_embeds=slot_embeds, pred_embeds=pred_embeds)
