"""Contrastive and reconstruction training objectives.

Both contrastive losses are InfoNCE with a dot-product score
g(a, b) = exp(a.b / tau). For every anchor (a predicted embedding) the
positive is the encoded embedding of the same sample and time step, and
the denominator sums g over every embedding of both kinds in the batch,
across samples and time steps, including the positive and the anchor's
own predicted embedding. The self term can be dropped via
``denominator_mode="exclude_self"``.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, Tensor

DENOMINATOR_MODES = ("literal", "exclude_self")


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")


def _nce_mean(anchors, positives, candidates, tau, self_offset, mode):
    """Mean over anchors of -log( g(anchor, positive) / sum_c g(anchor, c) ).

    ``anchors``/``positives``: [..., A, D]; ``candidates``: [..., M, D].
    ``self_offset``: column index of anchor a's own entry in the candidate
    axis is ``self_offset + a`` (used by exclude_self).
    """
    scores = ad.matmul(anchors, ad.swap_axes(candidates, -1, -2)) * (1.0 / tau)
    if mode == "exclude_self":
        num_anchors = anchors.shape[-2]
        mask = np.zeros(scores.shape[-2:], dtype=anchors.dtype)
        cols = self_offset + np.arange(num_anchors)
        mask[np.arange(num_anchors), cols] = -1e9  # exp underflows to exactly 0
        scores = scores + ad.constant(mask)
    elif mode != "literal":
        raise ValueError(f"unknown denominator mode: {mode}")
    pos_scores = ad.tsum(anchors * positives, axis=-1) * (1.0 / tau)
    return ad.tmean(ad.logsumexp(scores, axis=-1) - pos_scores)


def setcon_loss(slot_embeds, pred_embeds, tau: float = 0.5,
                denominator_mode: str = "literal") -> Tensor:
    """Contrast aggregated scene embeddings across the batch.

    ``slot_embeds``: [B, T, D] encoded embeddings; ``pred_embeds``:
    [B, T-2, D] predicted embeddings aligned with time steps 2..T-1.
    """
    _check_tau(tau)
    slot_embeds, pred_embeds = ad.as_tensor(slot_embeds), ad.as_tensor(pred_embeds)
    b, t, dim = slot_embeds.shape
    if pred_embeds.shape != (b, t - 2, dim):
        raise DimensionError(
            f"setcon_loss: predicted embeddings {pred_embeds.shape} do not align "
            f"with encoded embeddings {slot_embeds.shape}"
        )
    if b * t < 2:
        raise ValueError("setcon_loss needs at least two embeddings in the batch")
    anchors = ad.reshape(pred_embeds, (b * (t - 2), dim))
    positives = ad.reshape(slot_embeds[:, 2:], (b * (t - 2), dim))
    candidates = ad.concat(
        [ad.reshape(slot_embeds, (b * t, dim)), anchors], axis=0
    )
    return _nce_mean(anchors, positives, candidates, tau, self_offset=b * t,
                     mode=denominator_mode)


def slotwise_loss(slots, preds, tau: float = 0.5,
                  denominator_mode: str = "literal") -> Tensor:
    """Contrast individual slots, each against same-index slots only.

    ``slots``: [B, T, K, D]; ``preds``: [B, T-2, K, D]. The anchor
    p[i, t, k] is paired with s[i, t, k]; negatives are all s and p
    entries with the same slot index k across the batch. The result is
    the mean over anchors and slot indices.
    """
    _check_tau(tau)
    slots, preds = ad.as_tensor(slots), ad.as_tensor(preds)
    b, t, k, dim = slots.shape
    if preds.shape != (b, t - 2, k, dim):
        raise DimensionError(
            f"slotwise_loss: prediction shape {preds.shape} does not match "
            f"slots {slots.shape}"
        )
    # [K, B*(T-2), D] anchors/positives; [K, B*T + B*(T-2), D] candidates
    def per_index(x, steps):
        return ad.reshape(ad.swap_axes(ad.swap_axes(x, 1, 2), 0, 1), (k, b * steps, dim))

    anchors = per_index(preds, t - 2)
    positives = per_index(slots[:, 2:], t - 2)
    candidates = ad.concat([per_index(slots, t), anchors], axis=1)
    return _nce_mean(anchors, positives, candidates, tau, self_offset=b * t,
                     mode=denominator_mode)


def reconstruction_loss(slot_composites, pred_composites, frames) -> Tensor:
    """Summed mean-squared reconstruction error of both decoding heads.

    ``slot_composites`` aligns with all frames, ``pred_composites`` with
    frames 2..T-1. Gradients flow into everything upstream.
    """
    frames = ad.as_tensor(frames)
    slot_composites = ad.as_tensor(slot_composites)
    pred_composites = ad.as_tensor(pred_composites)
    if slot_composites.shape != frames.shape:
        raise DimensionError(
            f"reconstruction_loss: slot head {slot_composites.shape} vs frames {frames.shape}"
        )
    tail = frames[:, 2:]
    if pred_composites.shape != tail.shape:
        raise DimensionError(
            f"reconstruction_loss: prediction head {pred_composites.shape} vs targets {tail.shape}"
        )
    err_s = ad.tmean((slot_composites - frames) ** 2.0)
    err_p = ad.tmean((pred_composites - tail) ** 2.0)
    return err_s + err_p
