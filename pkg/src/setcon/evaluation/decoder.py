"""Spatial broadcast decoder probe.

Every slot vector is tiled over the image grid, joined with the position
ramp, and convolved (1x1 kernels) into RGB plus an unnormalized alpha
logit. Alphas are softmax-normalized across slots per pixel and used to
composite the per-slot reconstructions. As a probe the decoder trains on
stop-gradient features, so it measures representations without shaping
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import DimensionError, Tensor
from ..model.network import _add_linear, position_ramp
from ..optim import AdamState, adam_step
from ..params import ParameterTree


def build_decoder_params(slot_dim: int, filter_width: int, rng, dtype=np.float32) -> ParameterTree:
    tree = ParameterTree()
    _add_linear(tree, rng, "decoder.fc1", slot_dim + 2, filter_width, dtype)
    _add_linear(tree, rng, "decoder.fc2", filter_width, filter_width, dtype)
    _add_linear(tree, rng, "decoder.fc3", filter_width, 4, dtype)
    return tree


@dataclass
class DecoderOutput:
    rgb: Tensor           # [..., K, H, W, 3]
    alpha_logits: Tensor  # [..., K, H, W]
    alpha: Tensor         # [..., K, H, W], softmax across slots per pixel
    composite: Tensor     # [..., H, W, 3]


def broadcast_decode(slots, params: ParameterTree, frame_hw) -> DecoderOutput:
    slots = ad.as_tensor(slots)
    h, w = frame_hw
    n = h * w
    k, d = slots.shape[-2:]
    if params["decoder.fc1.weight"].shape[0] != d + 2:
        raise DimensionError(
            f"broadcast_decode: decoder built for slot width "
            f"{params['decoder.fc1.weight'].shape[0] - 2}, got {d}"
        )
    lead = slots.shape[:-2]
    tiled = ad.broadcast_to(ad.reshape(slots, lead + (k, 1, d)), lead + (k, n, d))
    ramp = ad.broadcast_to(position_ramp(h, w, slots.dtype), lead + (k, n, 2))
    x = ad.concat([tiled, ramp], axis=-1)
    x = ad.relu(ad.linear(x, params["decoder.fc1.weight"], params["decoder.fc1.bias"]))
    x = ad.relu(ad.linear(x, params["decoder.fc2.weight"], params["decoder.fc2.bias"]))
    x = ad.linear(x, params["decoder.fc3.weight"], params["decoder.fc3.bias"])  # [..., K, N, 4]
    rgb_flat = x[..., :3]
    alpha_logits = x[..., 3]                      # [..., K, N]
    alpha = ad.softmax(alpha_logits, axis=-2)     # across slots
    weighted = ad.reshape(alpha, alpha.shape + (1,)) * rgb_flat
    composite = ad.tsum(weighted, axis=-3)        # [..., N, 3]
    return DecoderOutput(
        rgb=ad.reshape(rgb_flat, lead + (k, h, w, 3)),
        alpha_logits=ad.reshape(alpha_logits, lead + (k, h, w)),
        alpha=ad.reshape(alpha, lead + (k, h, w)),
        composite=ad.reshape(composite, lead + (h, w, 3)),
    )


def probe_losses(slots, preds, frames, params: ParameterTree, frame_hw):
    """Decode both heads from stop-gradient features and return
    (joint loss over all decoded frames, slot-head MSE, prediction-head MSE).
    """
    slots_d = ad.detach(ad.as_tensor(slots))
    preds_d = ad.detach(ad.as_tensor(preds))
    frames = ad.as_tensor(frames)
    out_s = broadcast_decode(slots_d, params, frame_hw)
    out_p = broadcast_decode(preds_d, params, frame_hw)
    err_s = (out_s.composite - frames) ** 2.0
    err_p = (out_p.composite - frames[:, 2:]) ** 2.0
    mse_s = ad.tmean(err_s)
    mse_p = ad.tmean(err_p)
    total = (ad.tsum(err_s) + ad.tsum(err_p)) * (1.0 / (err_s.data.size + err_p.data.size))
    return total, mse_s, mse_p


def probe_train_step(slots, preds, frames, params: ParameterTree,
                     state: AdamState, frame_hw):
    """One Adam step on the decoder against composite-vs-frame MSE.

    Gradients stop at the slot boundary; encoder and transition parameters
    are untouched. Returns the updated decoder tree/state and both head
    MSEs measured before the update.
    """
    total, mse_s, mse_p = probe_losses(slots, preds, frames, params, frame_hw)
    params.zero_grads()
    total.backward()
    new_params, new_state = adam_step(params, params.grads(), state)
    return new_params, new_state, float(mse_s.data), float(mse_p.data)
