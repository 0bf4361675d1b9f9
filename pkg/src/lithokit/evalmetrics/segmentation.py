"""Pixel-level quality metrics for generated masks and contours.

All functions take parallel lists of binary images (``BinaryRaster`` or
plain numpy arrays) and reduce to a single scalar by averaging the
per-example score.  Scores are in [0, 1] and do not depend on example
order.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

from ..errors import InputError

_SQ3 = np.ones((3, 3), dtype=bool)


def _pixels(raster) -> np.ndarray:
    arr = raster.pixels if hasattr(raster, "pixels") else np.asarray(raster)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D binary image, got shape {arr.shape}")
    return arr.astype(bool)


def _paired(preds: Sequence, gts: Sequence):
    if len(preds) != len(gts):
        raise InputError(f"got {len(preds)} predictions for {len(gts)} references")
    if not preds:
        raise InputError("cannot average a metric over zero examples")
    for pred, gt in zip(preds, gts):
        p, g = _pixels(pred), _pixels(gt)
        if p.shape != g.shape:
            raise InputError(f"shape mismatch: {p.shape} vs {g.shape}")
        yield p, g


def mean_pixel_accuracy(preds: Sequence, gts: Sequence) -> float:
    """Mean over examples of the fraction of pixels that agree."""
    return float(np.mean([(p == g).mean() for p, g in _paired(preds, gts)]))


def mean_iou(preds: Sequence, gts: Sequence) -> float:
    """Mean intersection-over-union.  An example where both images are
    empty counts as 1.0 (perfect agreement on the empty set)."""
    scores = []
    for p, g in _paired(preds, gts):
        union = (p | g).sum()
        scores.append(1.0 if union == 0 else (p & g).sum() / union)
    return float(np.mean(scores))


def _edges(x: np.ndarray) -> np.ndarray:
    # Interior erosion with zero padding: foreground pixels on the canvas
    # border count as edge.  Same convention as the edge-overlap loss.
    return x & ~ndimage.binary_erosion(x, structure=_SQ3, border_value=0)


def edge_f1(preds: Sequence, gts: Sequence, dilation_radius: int = 1) -> float:
    """Boundary F1 with a dilation tolerance.

    Precision counts predicted edge pixels that land within
    ``dilation_radius`` (Chebyshev) of a reference edge pixel; recall is
    the symmetric quantity.  Examples where neither image has any edge
    score 1.0; an empty edge set on one side only scores 0.0.
    """
    if dilation_radius < 0:
        raise InputError(f"dilation_radius must be >= 0, got {dilation_radius}")
    structure = np.ones((2 * dilation_radius + 1,) * 2, dtype=bool)
    scores = []
    for p, g in _paired(preds, gts):
        ep, eg = _edges(p), _edges(g)
        np_, ng = int(ep.sum()), int(eg.sum())
        if np_ == 0 and ng == 0:
            scores.append(1.0)
            continue
        if dilation_radius == 0:
            dp, dg = ep, eg
        else:
            dp = ndimage.binary_dilation(ep, structure=structure)
            dg = ndimage.binary_dilation(eg, structure=structure)
        precision = (ep & dg).sum() / np_ if np_ else 0.0
        recall = (eg & dp).sum() / ng if ng else 0.0
        denom = precision + recall
        scores.append(2.0 * precision * recall / denom if denom > 0 else 0.0)
    return float(np.mean(scores))
