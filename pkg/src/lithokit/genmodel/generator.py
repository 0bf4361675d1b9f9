"""The unified mask+contour generator.

One layout encoding feeds two decode passes: the first produces the mask
probability raster from the 4-channel process encoding, the second
re-encodes the process conditions with the binarized mask appended as a
fifth channel and decodes the contour.  All heavy submodules (condition
encoder, fusion, decoder) are shared between the two passes.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import torch
from torch import nn

from ..corpus.types import BinaryRaster, ProcessCondition
from ..torchutil import straight_through_binarize
from .condition import ConditionEncoder
from .config import GeneratorConfig
from .decoder import RasterDecoder
from .fusion import CrossAttentionFusion
from .swin import LayoutEncoder
from .types import FusedFeatures, GenerationOutput, LayoutEmbedding, ProcessEmbedding

BINARIZE_THRESHOLD = 0.5


def raster_to_tensor(raster, device=None) -> torch.Tensor:
    """BinaryRaster / ndarray / tensor -> float32 tensor, same shape."""
    if isinstance(raster, BinaryRaster):
        raster = raster.pixels
    if isinstance(raster, torch.Tensor):
        return raster.to(device=device, dtype=torch.float32)
    return torch.as_tensor(np.asarray(raster), dtype=torch.float32, device=device)


class UnifiedGenerator(nn.Module):
    def __init__(self, cfg: Optional[GeneratorConfig] = None):
        super().__init__()
        self.cfg = (cfg or GeneratorConfig()).validate()
        self.layout_encoder = LayoutEncoder(self.cfg)
        self.condition_encoder = ConditionEncoder(self.cfg)
        self.fusion = CrossAttentionFusion(self.cfg.model_dim, self.cfg.heads)
        self.decoder = RasterDecoder(self.cfg)
        # Instrumentation for the encode-once contract; plain attribute,
        # intentionally not part of the state dict.
        self.layout_encode_count = 0

    # ----- single-sample component API -----

    def encode_layout(self, layout) -> LayoutEmbedding:
        x = raster_to_tensor(layout)
        if x.dim() == 2:
            x = x[None, None]
        elif x.dim() == 3:
            x = x[:, None]
        self.layout_encode_count += 1
        emb = self.layout_encoder(x)
        if emb.tokens.shape[0] == 1:
            return LayoutEmbedding(tokens=emb.tokens[0], spatial_shape=emb.spatial_shape)
        return emb

    def encode_process(self, cond: ProcessCondition,
                       extra=None) -> ProcessEmbedding:
        source = raster_to_tensor(cond.source_raster)[None, None]
        scalars = [
            torch.tensor([float(cond.resist_threshold)]),
            torch.tensor([float(cond.focus)]),
            torch.tensor([float(cond.dose)]),
        ]
        extra_t = None if extra is None else raster_to_tensor(extra)[None, None]
        inp = self.condition_encoder.build_input(source, *scalars, extra=extra_t)
        emb = self.condition_encoder(inp)
        return ProcessEmbedding(tokens=emb.tokens[0], spatial_shape=emb.spatial_shape)

    def cross_attention_fuse(self, proc: ProcessEmbedding,
                             lay: LayoutEmbedding) -> FusedFeatures:
        return self.fusion(proc, lay)

    def decode_raster(self, fused: FusedFeatures,
                      target_shape: Tuple[int, int]) -> torch.Tensor:
        return self.decoder(fused, target_shape)

    # ----- batched training/inference path -----

    def forward_batch(
        self,
        layout: torch.Tensor,
        source: torch.Tensor,
        threshold: torch.Tensor,
        focus: torch.Tensor,
        dose: torch.Tensor,
    ):
        """layout (B,1,H,W); source (B,1,h,w); scalars (B,).

        Returns (mask_prob, contour_prob, fused) with rasters (B,H,W) and
        the contour-stage fused features.
        """
        b, _, h, w = layout.shape
        self.layout_encode_count += 1
        lay = self.layout_encoder(layout)

        cond_in = self.condition_encoder.build_input(source, threshold, focus, dose)
        proc = self.condition_encoder(cond_in)
        fused_mask = self.fusion(proc, lay)
        mask_prob = self.decoder(fused_mask, (h, w))

        mask_hard = straight_through_binarize(mask_prob, BINARIZE_THRESHOLD)
        cond_in5 = self.condition_encoder.build_input(
            source, threshold, focus, dose, extra=mask_hard[:, None])
        proc5 = self.condition_encoder(cond_in5)
        fused_contour = self.fusion(proc5, lay)
        contour_prob = self.decoder(fused_contour, (h, w))
        return mask_prob, contour_prob, fused_contour

    forward = forward_batch

    def generate(self, layout, cond: ProcessCondition) -> GenerationOutput:
        """Single-sample inference; both rasters from one forward pass."""
        x = raster_to_tensor(layout)
        if x.dim() != 2:
            raise ValueError(f"expected a single 2-D layout, got shape {tuple(x.shape)}")
        source = raster_to_tensor(cond.source_raster)[None, None]
        scalars = [
            torch.tensor([float(cond.resist_threshold)]),
            torch.tensor([float(cond.focus)]),
            torch.tensor([float(cond.dose)]),
        ]
        with torch.no_grad():
            mask_prob, contour_prob, fused = self.forward_batch(
                x[None, None], source, *scalars)
        return GenerationOutput(
            mask_prob=mask_prob[0].detach(),
            contour_prob=contour_prob[0].detach(),
            fused=FusedFeatures(
                tokens=fused.tokens[0].detach(),
                attention_maps=fused.attention_maps[0].detach(),
            ),
        )
