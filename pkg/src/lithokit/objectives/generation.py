"""Generation losses: pixel BCE, Dice, edge-region Dice, and the two
contrastive terms (structure-aware InfoNCE over Dice similarities, and the
margin penalty on cross-process boundary similarity).

All functions are pure and operate on torch tensors; binary ground truths
may also be passed as BinaryRaster and are converted to the prediction's
dtype/device. Predictions are probability rasters in [0, 1]; clamping to
[eps, 1-eps] happens inside the log-based losses only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..corpus.types import BinaryRaster
from ..errors import InputError
from .weights import GenLossWeights

logger = logging.getLogger(__name__)

EPS = 1e-7
DICE_SMOOTH = 1.0


def _as_tensor(x, like: torch.Tensor) -> torch.Tensor:
    if isinstance(x, BinaryRaster):
        x = torch.from_numpy(x.pixels.astype(np.float32))
    elif isinstance(x, np.ndarray):
        x = torch.from_numpy(x)
    return x.to(dtype=like.dtype, device=like.device)


def _check_shapes(pred: torch.Tensor, target: torch.Tensor):
    if pred.shape != target.shape:
        raise InputError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")


def bce_loss(pred: torch.Tensor, target) -> torch.Tensor:
    """Pixel-mean binary cross-entropy with the effective clamp [eps, 1-eps].

    Each log argument is floored separately (log max(p, eps) and
    log max(1-p, eps)): equivalent to clamping p to [eps, 1-eps] but exact
    for saturated inputs, where float32 cannot represent 1 - eps precisely.
    """
    target = _as_tensor(target, pred)
    _check_shapes(pred, target)
    pos = pred.clamp_min(EPS).log()
    neg = (1.0 - pred).clamp_min(EPS).log()
    return -(target * pos + (1.0 - target) * neg).mean()


def dice_loss(pred: torch.Tensor, target) -> torch.Tensor:
    """Soft Dice loss with smoothing 1.0; per-sample when batched."""
    target = _as_tensor(target, pred)
    _check_shapes(pred, target)
    dims = (-2, -1)
    num = 2.0 * (pred * target).sum(dim=dims) + DICE_SMOOTH
    den = pred.sum(dim=dims) + target.sum(dim=dims) + DICE_SMOOTH
    return (1.0 - num / den).mean()


def dice_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Raw Dice overlap 2|a∩b|/(|a|+|b|), no smoothing (guarded denominator)."""
    _check_shapes(a, b)
    num = 2.0 * (a * b).sum()
    den = a.sum() + b.sum()
    return num / den.clamp_min(EPS)


def _erode3(binary: torch.Tensor) -> torch.Tensor:
    """3x3 zero-padded binary erosion (min-pool) on [..., H, W] floats."""
    x = binary.reshape(-1, 1, *binary.shape[-2:])
    x = F.pad(x, (1, 1, 1, 1), value=0.0)
    eroded = -F.max_pool2d(-x, kernel_size=3, stride=1)
    return eroded.reshape(binary.shape)


def edge_mask(binary: torch.Tensor) -> torch.Tensor:
    """Inner morphological gradient: pixels lost under 3x3 erosion."""
    return binary * (1.0 - _erode3(binary))


def edge_regions(g: BinaryRaster) -> BinaryRaster:
    """Raster-level edge extraction; the border counts as background."""
    t = torch.from_numpy(g.pixels.astype(np.float32))
    e = edge_mask(t)
    return BinaryRaster(e.numpy().astype(np.uint8), pitch=g.pitch)


def edge_dice_loss(pred: torch.Tensor, target) -> torch.Tensor:
    """Dice loss restricted to the edge regions of pred (binarized at 0.5)
    and of the target; returns 0 when both edge sets are empty.

    Gradients flow through the prediction's values on its own edge support
    (the edge masks themselves are detached binarizations).
    """
    target = _as_tensor(target, pred)
    _check_shapes(pred, target)
    e_pred = edge_mask((pred >= 0.5).to(pred.dtype)).detach()
    e_tgt = edge_mask((target >= 0.5).to(pred.dtype)).detach()
    if e_pred.sum() == 0 and e_tgt.sum() == 0:
        return pred.new_zeros(())
    p = pred * e_pred
    t = target * e_tgt
    dims = (-2, -1)
    num = 2.0 * (p * t).sum(dim=dims) + DICE_SMOOTH
    den = p.sum(dim=dims) + t.sum(dim=dims) + DICE_SMOOTH
    return (1.0 - num / den).mean()


def _branch_terms(pred, target, w: GenLossWeights, prefix: str) -> dict:
    zero = pred.new_zeros(())
    return {
        f"{prefix}_dice": zero if w.disable_dice else dice_loss(pred, target),
        f"{prefix}_bce": zero if w.disable_bce else bce_loss(pred, target),
        f"{prefix}_edge": zero if w.disable_edge else edge_dice_loss(pred, target),
    }


def _branch_total(terms: dict, w: GenLossWeights, prefix: str):
    return (
        w.w_dice * terms[f"{prefix}_dice"]
        + w.w_bce * terms[f"{prefix}_bce"]
        + w.w_edge * terms[f"{prefix}_edge"]
    )


def reconstruction_terms(outs, sample, w: GenLossWeights) -> dict:
    """Per-term dict for the mask and contour reconstruction branches.

    outs needs .mask_prob/.contour_prob; sample needs .mask/.contour
    (tensors or BinaryRaster).
    """
    terms = {}
    terms.update(_branch_terms(outs.mask_prob, sample.mask, w, "mask"))
    terms.update(_branch_terms(outs.contour_prob, sample.contour, w, "contour"))
    return terms


def reconstruction_loss(outs, sample, w: GenLossWeights) -> torch.Tensor:
    """w_mask * (mask branch) + w_contour * (contour branch); each branch is
    the weighted sum of Dice, BCE and edge-Dice against its ground truth."""
    terms = reconstruction_terms(outs, sample, w)
    return w.w_mask * _branch_total(terms, w, "mask") + w.w_contour * _branch_total(
        terms, w, "contour"
    )


def sac_from_similarities(
    pos_sims: torch.Tensor, neg_sims: Sequence[torch.Tensor], tau: float,
    literal_denominator: bool = False,
) -> torch.Tensor:
    """InfoNCE over precomputed Dice similarities.

    pos_sims: [N] anchor-positive similarities; neg_sims: per-anchor tensors
    of anchor-negative similarities. The default denominator includes the
    positive term (standard InfoNCE, keeps the loss nonnegative); the
    literal variant normalizes over negatives only.
    """
    if len(pos_sims) == 0 or len(neg_sims) != len(pos_sims):
        raise InputError("need one positive and one negative set per anchor")
    losses = []
    for pos, negs in zip(pos_sims, neg_sims):
        if negs.numel() == 0:
            raise InputError("empty negative set for an anchor")
        logits = negs / tau
        if literal_denominator:
            losses.append(-pos / tau + torch.logsumexp(logits, dim=0))
        else:
            # -log softmax(pos | pos ∪ negs), computed stably
            all_logits = torch.cat([(pos / tau).reshape(1), logits])
            losses.append(torch.logsumexp(all_logits, dim=0) - pos / tau)
    return torch.stack(losses).mean()


def sac_loss(
    anchors: Sequence[torch.Tensor],
    positives: Sequence[torch.Tensor],
    negatives,
    tau: float,
    literal_denominator: bool = False,
) -> torch.Tensor:
    """Structure-aware contrastive loss over prediction rasters.

    Each anchor is a prediction for one layout; its positive is the
    prediction for the same layout under a different process; negatives are
    predictions from other layouts. negatives may be one shared list or a
    per-anchor list of lists.
    """
    if len(anchors) == 0:
        raise InputError("sac_loss needs at least one anchor")
    if len(positives) != len(anchors):
        raise InputError("one positive per anchor required")
    if len(negatives) == 0:
        raise InputError("sac_loss needs a non-empty negative set")
    per_anchor = not torch.is_tensor(negatives[0])
    if per_anchor and len(negatives) != len(anchors):
        raise InputError("per-anchor negatives must align with anchors")
    pos_sims, neg_sims = [], []
    for i, (a, p) in enumerate(zip(anchors, positives)):
        pos_sims.append(dice_similarity(a, p))
        negs = negatives[i] if per_anchor else negatives
        if len(negs) == 0:
            raise InputError("empty negative set for an anchor")
        neg_sims.append(torch.stack([dice_similarity(a, n) for n in negs]))
    return sac_from_similarities(
        torch.stack(pos_sims), neg_sims, tau, literal_denominator
    )


def pac_loss(pairs: Sequence, m: float) -> torch.Tensor:
    """Mean margin penalty ReLU(m - edge_dice_loss(pred, gt)) over pairs of
    (prediction under a different process, ground truth). Empty input is a
    soft no-op (0 with a warning) since small batches may lack pairs."""
    if len(pairs) == 0:
        logger.warning("pac_loss called with no pairs; returning 0")
        return torch.zeros(())
    losses = [F.relu(m - edge_dice_loss(pred, gt)) for pred, gt in pairs]
    return torch.stack(losses).mean()


@dataclass
class GenerationBatch:
    """Everything total_generation_loss needs for one step.

    mask_prob/contour_prob are [B,H,W] predictions aligned with the
    [B,H,W] targets; the contrastive fields follow sac_loss/pac_loss.
    """

    mask_prob: torch.Tensor
    contour_prob: torch.Tensor
    mask_target: torch.Tensor
    contour_target: torch.Tensor
    sac_anchors: list = field(default_factory=list)
    sac_positives: list = field(default_factory=list)
    sac_negatives: list = field(default_factory=list)
    pac_pairs: list = field(default_factory=list)


class _Outs:
    def __init__(self, mask_prob, contour_prob):
        self.mask_prob, self.contour_prob = mask_prob, contour_prob


class _Tgts:
    def __init__(self, mask, contour):
        self.mask, self.contour = mask, contour


def generation_loss_terms(batch: GenerationBatch, w: GenLossWeights) -> dict:
    """All logged generation terms, including exact zeros for disabled ones."""
    terms = reconstruction_terms(
        _Outs(batch.mask_prob, batch.contour_prob),
        _Tgts(batch.mask_target, batch.contour_target),
        w,
    )
    zero = batch.mask_prob.new_zeros(())
    if w.disable_sac or not batch.sac_anchors:
        terms["sac"] = zero
    else:
        terms["sac"] = sac_loss(
            batch.sac_anchors, batch.sac_positives, batch.sac_negatives,
            w.tau, w.sac_literal_denominator,
        )
    if w.disable_pac or not batch.pac_pairs:
        terms["pac"] = zero
    else:
        terms["pac"] = pac_loss(batch.pac_pairs, w.margin)
    return terms


def combine_generation_terms(terms: dict, w: GenLossWeights) -> torch.Tensor:
    """Weighted total from a generation_loss_terms dict:
    w_rec * reconstruction + w_con * (SAC + PAC)."""
    rec = w.w_mask * _branch_total(terms, w, "mask") + w.w_contour * _branch_total(
        terms, w, "contour"
    )
    return w.w_rec * rec + w.w_con * (terms["sac"] + terms["pac"])


def total_generation_loss(batch: GenerationBatch, w: GenLossWeights) -> torch.Tensor:
    """w_rec * reconstruction + w_con * (SAC + PAC)."""
    return combine_generation_terms(generation_loss_terms(batch, w), w)
