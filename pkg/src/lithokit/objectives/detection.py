"""Detection losses and the set-prediction matcher.

Per-query class scores are independent sigmoids in [0,1]; boxes are
normalized (cx, cy, w, h) unless a function documents corner format.
Matching runs per image: every ground truth is assigned one query
(scipy's linear-sum assignment), all other queries count as negatives.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from ..errors import InputError
from .weights import DetLossWeights

EPS = 1e-7


def cxcywh_to_xyxy(boxes: torch.Tensor) -> torch.Tensor:
    cx, cy, w, h = boxes.unbind(-1)
    return torch.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], dim=-1)


def xyxy_to_cxcywh(boxes: torch.Tensor) -> torch.Tensor:
    x0, y0, x1, y1 = boxes.unbind(-1)
    return torch.stack([(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0], dim=-1)


def _iou_xyxy(a: torch.Tensor, b: torch.Tensor):
    """Elementwise IoU and union for broadcastable [..., 4] corner boxes."""
    lt = torch.max(a[..., :2], b[..., :2])
    rb = torch.min(a[..., 2:], b[..., 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    return inter / union.clamp_min(EPS), union


def box_iou(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise IoU of corner-format boxes."""
    return _iou_xyxy(a, b)[0]


def giou_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """1 - GIoU for corner-format boxes; elementwise over leading dims.

    GIoU = IoU - |R \\ (pred ∪ gt)| / |R| with R the smallest enclosing box.
    """
    for name, box in (("pred", pred), ("gt", gt)):
        wh = box[..., 2:] - box[..., :2]
        if (wh <= 0).any():
            raise InputError(f"degenerate {name} box (non-positive width/height)")
    iou, union = _iou_xyxy(pred, gt)
    lt = torch.min(pred[..., :2], gt[..., :2])
    rb = torch.max(pred[..., 2:], gt[..., 2:])
    enclose = (rb - lt).clamp(min=0)
    area_r = (enclose[..., 0] * enclose[..., 1]).clamp_min(EPS)
    giou = iou - (area_r - union) / area_r
    return 1.0 - giou


def bbox_l1_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean over matched pairs of the per-box L1 distance (cx,cy,w,h)."""
    if pred.shape != gt.shape:
        raise InputError(f"box count mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    if pred.numel() == 0:
        return pred.new_zeros(())
    return (pred - gt).abs().sum(-1).mean()


def varifocal_loss(p: torch.Tensor, t, w: DetLossWeights) -> torch.Tensor:
    """IoU-aware classification loss.

    weight = alpha * p^gamma * (1-t) + t; loss = -weight * BCE(p, t).
    Scores are summed over the class dimension and averaged over queries;
    scalar inputs return the single elementwise value.
    """
    p = torch.as_tensor(p).clamp(0.0, 1.0)
    t = torch.as_tensor(t, dtype=p.dtype, device=p.device)
    weight = w.vfl_alpha * p**w.vfl_gamma * (1.0 - t) + t
    # per-term clamped logs: exact for saturated p and immune to 0*(-inf)
    ce = -(t * p.clamp_min(EPS).log() + (1.0 - t) * (1.0 - p).clamp_min(EPS).log())
    el = weight * ce
    if el.dim() == 0:
        return el
    return el.sum(-1).mean()


def focal_loss(p: torch.Tensor, t: torch.Tensor, alpha: float = 0.25, gamma: float = 2.0) -> torch.Tensor:
    """Standard sigmoid focal loss with one-hot targets (VFL ablation)."""
    p = torch.as_tensor(p).clamp(0.0, 1.0)
    t = torch.as_tensor(t, dtype=p.dtype, device=p.device)
    pt = t * p + (1.0 - t) * (1.0 - p)
    alpha_t = t * alpha + (1.0 - t) * (1.0 - alpha)
    el = -alpha_t * (1.0 - pt) ** gamma * pt.clamp_min(EPS).log()
    if el.dim() == 0:
        return el
    return el.sum(-1).mean()


def fppl_loss(p_neg, w: DetLossWeights) -> torch.Tensor:
    """False-positive penalty on unmatched-query scores.

    Default (corrected) form mean(alpha * p^gamma * -log(1-p)) grows with p,
    so confident false positives cost more; fppl_literal_form switches to
    the published mean(alpha * (1-p)^gamma * -log(1-p)).
    """
    if not torch.is_tensor(p_neg):
        p_neg = torch.as_tensor(p_neg, dtype=torch.float32)
    if p_neg.numel() == 0:
        return p_neg.new_zeros(())
    p = p_neg.clamp(0.0, 1.0)
    log_term = -(1.0 - p).clamp_min(EPS).log()
    if w.fppl_literal_form:
        return (w.fppl_alpha * (1.0 - p) ** w.fppl_gamma * log_term).mean()
    return (w.fppl_alpha * p**w.fppl_gamma * log_term).mean()


def match_cost_matrix(
    pred_probs: torch.Tensor,
    pred_boxes: torch.Tensor,
    gt_labels: torch.Tensor,
    gt_boxes: torch.Tensor,
    w: DetLossWeights,
) -> torch.Tensor:
    """[Q, G] assignment costs: class affinity + L1 + GIoU, spec weights."""
    cost_class = -pred_probs[:, gt_labels]
    cost_bbox = torch.cdist(pred_boxes, gt_boxes, p=1)
    pred_xy = cxcywh_to_xyxy(pred_boxes).unsqueeze(1)
    gt_xy = cxcywh_to_xyxy(gt_boxes).unsqueeze(0)
    cost_giou = giou_loss(pred_xy.expand(-1, gt_boxes.shape[0], -1),
                          gt_xy.expand(pred_boxes.shape[0], -1, -1))
    return w.w_vfl * cost_class + w.w_bbox * cost_bbox + w.w_giou * cost_giou


def hungarian_match(
    pred_probs: torch.Tensor,
    pred_boxes: torch.Tensor,
    gt_labels: torch.Tensor,
    gt_boxes: torch.Tensor,
    w: DetLossWeights,
):
    """Minimum-cost one-to-one assignment of ground truths to queries.

    Returns (query_idx, gt_idx) LongTensors of length = #ground truths;
    queries not in query_idx are negatives. Raises if there are more ground
    truths than queries (truncation would silently drop labels).
    """
    q, g = pred_probs.shape[0], gt_labels.shape[0]
    if g > q:
        raise InputError(f"{g} ground truths exceed {q} queries")
    empty = pred_probs.new_zeros((0,), dtype=torch.long)
    if g == 0:
        return empty, empty.clone()
    cost = match_cost_matrix(pred_probs, pred_boxes, gt_labels, gt_boxes, w)
    rows, cols = linear_sum_assignment(cost.detach().cpu().numpy().astype(np.float64))
    order = np.argsort(cols)
    qi = torch.as_tensor(rows[order], dtype=torch.long, device=pred_probs.device)
    gi = torch.as_tensor(cols[order], dtype=torch.long, device=pred_probs.device)
    return qi, gi


def detection_loss_terms(
    pred_probs: torch.Tensor,
    pred_boxes: torch.Tensor,
    gt_labels: torch.Tensor,
    gt_boxes: torch.Tensor,
    w: DetLossWeights,
    assignment: Optional[tuple] = None,
    vfl_targets: Optional[torch.Tensor] = None,
) -> dict:
    """All logged detection terms for one image's query set.

    assignment/vfl_targets can be precomputed to hold the matcher and the
    IoU targets fixed (they are non-differentiable context in training too:
    targets are detached, the matcher is discrete).
    """
    if assignment is None:
        assignment = hungarian_match(pred_probs, pred_boxes, gt_labels, gt_boxes, w)
    qi, gi = assignment
    zero = pred_probs.new_zeros(())

    if vfl_targets is None:
        vfl_targets = torch.zeros_like(pred_probs)
        if qi.numel():
            ious = box_iou(
                cxcywh_to_xyxy(pred_boxes[qi]), cxcywh_to_xyxy(gt_boxes[gi])
            ).detach().clamp(0.0, 1.0)
            vfl_targets[qi, gt_labels[gi]] = ious.to(vfl_targets.dtype)

    if w.class_loss == "vfl":
        cls_term = varifocal_loss(pred_probs, vfl_targets, w)
    else:
        one_hot = (vfl_targets > 0).to(pred_probs.dtype)
        cls_term = focal_loss(pred_probs, one_hot)

    neg_mask = torch.ones(pred_probs.shape[0], dtype=torch.bool, device=pred_probs.device)
    neg_mask[qi] = False
    if w.disable_fppl or not neg_mask.any():
        fppl_term = zero
    else:
        fppl_term = fppl_loss(pred_probs[neg_mask].max(dim=-1).values, w)

    if qi.numel() == 0:
        bbox_term = zero
        giou_term = zero
    elif w.box_loss == "l1_giou":
        bbox_term = bbox_l1_loss(pred_boxes[qi], gt_boxes[gi])
        giou_term = giou_loss(
            cxcywh_to_xyxy(pred_boxes[qi]), cxcywh_to_xyxy(gt_boxes[gi])
        ).mean()
    else:  # iou_only ablation: single overlap term, no L1
        bbox_term = zero
        giou_term = (
            1.0 - box_iou(cxcywh_to_xyxy(pred_boxes[qi]), cxcywh_to_xyxy(gt_boxes[gi]))
        ).mean()

    return {"vfl": cls_term, "fppl": fppl_term, "bbox": bbox_term, "giou": giou_term}


def total_detection_loss(
    pred_probs: torch.Tensor,
    pred_boxes: torch.Tensor,
    gt_labels: torch.Tensor,
    gt_boxes: torch.Tensor,
    w: DetLossWeights,
    assignment: Optional[tuple] = None,
    vfl_targets: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """w_vfl*cls + w_fppl*fppl + w_bbox*L1 + w_giou*GIoU for one image."""
    terms = detection_loss_terms(
        pred_probs, pred_boxes, gt_labels, gt_boxes, w, assignment, vfl_targets
    )
    return (
        w.w_vfl * terms["vfl"]
        + w.w_fppl * terms["fppl"]
        + w.w_bbox * terms["bbox"]
        + w.w_giou * terms["giou"]
    )
