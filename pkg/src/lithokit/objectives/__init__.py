"""Training objectives: generation (pixel + contrastive) and detection losses."""

from .detection import (
    bbox_l1_loss,
    box_iou,
    cxcywh_to_xyxy,
    detection_loss_terms,
    focal_loss,
    fppl_loss,
    giou_loss,
    hungarian_match,
    match_cost_matrix,
    total_detection_loss,
    varifocal_loss,
    xyxy_to_cxcywh,
)
from .generation import (
    DICE_SMOOTH,
    EPS,
    GenerationBatch,
    bce_loss,
    combine_generation_terms,
    dice_loss,
    dice_similarity,
    edge_dice_loss,
    edge_mask,
    edge_regions,
    generation_loss_terms,
    pac_loss,
    reconstruction_loss,
    reconstruction_terms,
    sac_from_similarities,
    sac_loss,
    total_generation_loss,
)
from .weights import DetLossWeights, GenLossWeights

__all__ = [
    "DetLossWeights",
    "GenLossWeights",
    "GenerationBatch",
    "DICE_SMOOTH",
    "EPS",
    "bbox_l1_loss",
    "bce_loss",
    "box_iou",
    "combine_generation_terms",
    "cxcywh_to_xyxy",
    "detection_loss_terms",
    "dice_loss",
    "dice_similarity",
    "edge_dice_loss",
    "edge_mask",
    "edge_regions",
    "focal_loss",
    "fppl_loss",
    "generation_loss_terms",
    "giou_loss",
    "hungarian_match",
    "match_cost_matrix",
    "pac_loss",
    "reconstruction_loss",
    "reconstruction_terms",
    "sac_from_similarities",
    "sac_loss",
    "total_detection_loss",
    "total_generation_loss",
    "varifocal_loss",
    "xyxy_to_cxcywh",
]
