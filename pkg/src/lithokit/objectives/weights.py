"""Loss-weight bundles and ablation switches.

The disable_* flags implement the ablation axes: a disabled term is skipped
entirely and logged as exactly 0, so ablation runs are config-distinct and
auditable from their logs alone. The *_literal flags switch individual
formulas to their published textual form where that form is inconsistent
with the stated intent (see the corrected defaults in generation/detection).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..errors import ConfigurationError


@dataclass
class GenLossWeights:
    """Weights for the generation objective (reconstruction + contrastive)."""

    w_rec: float = 1.0
    w_con: float = 0.5
    w_mask: float = 2.0
    w_contour: float = 1.0
    w_dice: float = 2.0
    w_bce: float = 1.0
    w_edge: float = 0.3
    tau: float = 0.07
    margin: float = 0.5
    disable_bce: bool = False
    disable_dice: bool = False
    disable_edge: bool = False
    disable_sac: bool = False
    disable_pac: bool = False
    sac_literal_denominator: bool = False

    def __post_init__(self):
        _check_nonnegative(self)
        if self.tau <= 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")


@dataclass
class DetLossWeights:
    """Weights and focal parameters for the detection objective."""

    w_vfl: float = 1.0
    w_fppl: float = 1.5
    w_bbox: float = 5.0
    w_giou: float = 2.0
    vfl_alpha: float = 0.75
    vfl_gamma: float = 0.5
    fppl_alpha: float = 0.25
    fppl_gamma: float = 2.0
    disable_fppl: bool = False
    fppl_literal_form: bool = False
    class_loss: str = "vfl"  # "vfl" | "focal"
    box_loss: str = "l1_giou"  # "l1_giou" | "iou_only"

    def __post_init__(self):
        _check_nonnegative(self)
        if self.class_loss not in ("vfl", "focal"):
            raise ConfigurationError(f"unknown class_loss {self.class_loss!r}")
        if self.box_loss not in ("l1_giou", "iou_only"):
            raise ConfigurationError(f"unknown box_loss {self.box_loss!r}")


def _check_nonnegative(obj):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
            raise ConfigurationError(f"{f.name} must be >= 0, got {v}")
