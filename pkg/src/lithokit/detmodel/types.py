from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import torch

from ..corpus.types import ViolationClass
from ..errors import InputError


@dataclass
class PyramidFeatures:
    """Multi-scale backbone maps at strides 8 / 16 / 32."""

    s1: torch.Tensor
    s2: torch.Tensor
    s3: torch.Tensor

    def __post_init__(self):
        for a, b in ((self.s1, self.s2), (self.s2, self.s3)):
            if a.shape[-1] != 2 * b.shape[-1] or a.shape[-2] != 2 * b.shape[-2]:
                raise InputError("pyramid levels must halve spatially per stride")


@dataclass
class QuerySet:
    """Learned object queries; ``embeddings`` is (count, d)."""

    count: int
    embeddings: torch.Tensor

    def __post_init__(self):
        if self.embeddings.shape[0] != self.count:
            raise InputError(
                f"{self.embeddings.shape[0]} embeddings for count {self.count}")


@dataclass(frozen=True)
class Detection:
    """One query's prediction.

    ``bbox`` is (cx, cy, w, h) normalized to [0, 1].  ``klass`` is the
    argmax violation class, or the no-hotspot placeholder when no class
    score clears the 0.5 sigmoid decision boundary — the box and its
    confidence are still reported either way (no suppression happens
    here; the metrics layer applies the operating-point filters).
    """

    klass: ViolationClass
    bbox: Tuple[float, float, float, float]
    confidence: float

    def __post_init__(self):
        _, _, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise InputError(f"degenerate detection box {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")
