"""Reconstruction and segmentation metrics."""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import DimensionError


def mse(predicted, target) -> float:
    predicted = np.asarray(predicted)
    target = np.asarray(target)
    if predicted.shape != target.shape:
        raise DimensionError(
            f"mse: shapes differ, {predicted.shape} vs {target.shape}"
        )
    diff = predicted.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(diff * diff))


def ari(ground_truth, predicted) -> float:
    """Adjusted Rand index between two labelings of the same pixels.

    Computed from the contingency table with exact integer pair counts:
    (Index - Expected) / (Max - Expected). Returns 1.0 in the degenerate
    case where the denominator vanishes (e.g. both partitions a single
    cluster) and NaN when there are no pixels to evaluate.
    """
    gt = np.asarray(ground_truth).ravel()
    pred = np.asarray(predicted).ravel()
    if gt.shape != pred.shape:
        raise DimensionError(f"ari: label counts differ, {gt.shape} vs {pred.shape}")
    n = gt.size
    if n == 0:
        return float("nan")
    _, gt_ids = np.unique(gt, return_inverse=True)
    _, pred_ids = np.unique(pred, return_inverse=True)
    r = int(gt_ids.max()) + 1
    s = int(pred_ids.max()) + 1
    table = np.zeros((r, s), dtype=np.int64)
    np.add.at(table, (gt_ids, pred_ids), 1)

    index = sum(math.comb(int(v), 2) for v in table.ravel())
    sum_a = sum(math.comb(int(v), 2) for v in table.sum(axis=1))
    sum_b = sum(math.comb(int(v), 2) for v in table.sum(axis=0))
    total = math.comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


def segmentation_pair(gt_mask, alpha):
    """Background-excluded labels for ARI.

    ``gt_mask``: [H, W] integer ids with 0 = background; ``alpha``:
    [K, H, W] normalized decoder masks. Pixels whose ground truth is
    background are dropped; predictions are hard argmax assignments.
    """
    gt_mask = np.asarray(gt_mask)
    alpha = np.asarray(alpha)
    if alpha.shape[1:] != gt_mask.shape:
        raise DimensionError(
            f"segmentation_pair: alpha {alpha.shape} does not cover mask {gt_mask.shape}"
        )
    keep = gt_mask > 0
    predicted = alpha.argmax(axis=0)
    return gt_mask[keep], predicted[keep]


def foreground_ari(gt_mask, alpha) -> float:
    gt, pred = segmentation_pair(gt_mask, alpha)
    return ari(gt, pred)
