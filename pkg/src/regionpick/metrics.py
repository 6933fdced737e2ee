"""Segmentation metrics: per-class IoU / mIoU and label-distribution ratios."""

from __future__ import annotations

import numpy as np

from .types import ValidationError


def compute_iou(pred_labels, true_labels, n_classes: int):
    """Per-class IoU and mIoU from two label vectors.

    IoU_c = TP / (TP + FP + FN).  Classes absent from both prediction and
    truth get NaN and are excluded from the mean.
    """
    pred = np.asarray(pred_labels, dtype=np.int64).reshape(-1)
    true = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    if pred.shape != true.shape:
        raise ValidationError("prediction and truth lengths differ")
    if pred.size == 0:
        raise ValidationError("empty label vectors")
    for name, arr in (("prediction", pred), ("truth", true)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValidationError(f"{name} labels outside [0, {n_classes})")
    confusion = np.bincount(true * n_classes + pred,
                            minlength=n_classes * n_classes).reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = tp + fp + fn
    iou = np.full(n_classes, np.nan)
    present = denom > 0
    iou[present] = tp[present] / denom[present]
    if not np.any(present):
        raise ValidationError("no class present in either vector")
    miou = float(np.mean(iou[present]))
    return iou, miou


def class_distribution_ratio(new_labels, n_classes: int) -> np.ndarray:
    """Per-class share of newly labeled points, in permille."""
    labels = np.asarray(new_labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise ValidationError("empty label delta")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValidationError(f"labels outside [0, {n_classes})")
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    return counts / labels.size * 1000.0
