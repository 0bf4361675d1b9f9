"""Intermediate representations passed between generator components."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import torch


@dataclass
class LayoutEmbedding:
    """Grid-ordered layout tokens from the windowed-attention encoder.

    ``tokens`` is (N, d) for a single layout or (B, N, d) batched, with
    N = h·w in row-major order of ``spatial_shape``.
    """

    tokens: torch.Tensor
    spatial_shape: Tuple[int, int]

    def __post_init__(self):
        h, w = self.spatial_shape
        if self.tokens.shape[-2] != h * w:
            raise ValueError(
                f"{self.tokens.shape[-2]} tokens inconsistent with grid {self.spatial_shape}")


@dataclass
class ProcessEmbedding:
    """Tokens from the condition encoder; (M, d) or (B, M, d)."""

    tokens: torch.Tensor
    spatial_shape: Tuple[int, int]


@dataclass
class FusedFeatures:
    """Cross-attention output.

    ``attention_maps`` keeps the per-head row-stochastic matrices,
    shape (heads, M, N) or (B, heads, M, N); they feed conformance tests
    and the detector-side feature injection.
    """

    tokens: torch.Tensor
    attention_maps: torch.Tensor


@dataclass
class GenerationOutput:
    mask_prob: torch.Tensor  # (H, W) in [0, 1]
    contour_prob: torch.Tensor  # (H, W) in [0, 1]
    fused: FusedFeatures  # from the contour stage
