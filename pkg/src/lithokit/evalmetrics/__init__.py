"""Evaluation metrics for generation quality and hotspot detection."""

from .detection import (
    DetectionSummary,
    ScoredBox,
    average_precision,
    box_iou_xyxy,
    detection_summary,
    match_detections,
    match_flags,
    to_pixel_boxes,
)
from .segmentation import edge_f1, mean_iou, mean_pixel_accuracy

__all__ = [
    "DetectionSummary",
    "ScoredBox",
    "average_precision",
    "box_iou_xyxy",
    "detection_summary",
    "match_detections",
    "match_flags",
    "to_pixel_boxes",
    "edge_f1",
    "mean_iou",
    "mean_pixel_accuracy",
]
