"""Hotspot detector facade: backbone → global encoder → pyramid fusion →
optional generator injection → query decoder."""

from __future__ import annotations

from typing import List, Optional, Sequence

import torch
from torch import nn

from ..corpus.types import TASK_CLASSES, Task, ViolationClass
from ..errors import InputError, UsageError
from ..genmodel.generator import raster_to_tensor
from ..genmodel.types import FusedFeatures
from ..torchutil import sincos_position_2d
from .backbone import Backbone
from .config import DetectorConfig
from .decoder import QueryDecoder
from .encoder import GeneratorInjection, GlobalEncoder, PyramidFusion
from .types import Detection, PyramidFeatures, QuerySet

# Sigmoid decision boundary below which a query is labeled no-hotspot.
NO_HOTSPOT_BOUNDARY = 0.5

_TASK_ARITY = {Task.DRC: 1, Task.MRC: 1, Task.LRC: 2}


class HotspotDetector(nn.Module):
    def __init__(self, cfg: Optional[DetectorConfig] = None):
        super().__init__()
        self.cfg = (cfg or DetectorConfig()).validate()
        self.backbone = Backbone(self.cfg)
        self.global_encoder = GlobalEncoder(self.cfg.backbone_channels[2], self.cfg.heads)
        self.pyramid_fusion = PyramidFusion(self.cfg)
        self.injection = GeneratorInjection(self.cfg)
        self.decoder = QueryDecoder(self.cfg)

    # ----- component ops -----

    def backbone_features(self, primary, secondary=None) -> PyramidFeatures:
        x = self._as_batch(primary)
        y = None if secondary is None else self._as_batch(secondary)
        return self.backbone(x, y)

    def encode_global(self, s3: torch.Tensor) -> torch.Tensor:
        return self.global_encoder(s3)

    def fuse_pyramid(self, pyramid: PyramidFeatures) -> torch.Tensor:
        return self.pyramid_fusion(pyramid.s1, pyramid.s2, pyramid.s3)

    def inject_generator_context(self, memory: torch.Tensor,
                                 fused: FusedFeatures) -> torch.Tensor:
        return self.injection(memory, fused.tokens)

    def decode_detections(self, memory: torch.Tensor,
                          queries: Optional[QuerySet] = None) -> List[Detection]:
        """Single-sample decode of a fused memory map into Q detections."""
        if memory.dim() == 3:
            memory = memory[None]
        probs, boxes = self._decode(memory, queries)
        return self._to_detections(probs[0], boxes[0])

    @property
    def query_set(self) -> QuerySet:
        return self.decoder.query_set

    # ----- batched path -----

    def _decode(self, memory: torch.Tensor, queries: Optional[QuerySet] = None):
        b, c, h, w = memory.shape
        tokens = memory.flatten(2).transpose(1, 2)
        tokens = tokens + sincos_position_2d(h, w, c, device=memory.device,
                                             dtype=memory.dtype)
        q = None if queries is None else queries.embeddings
        return self.decoder(tokens, q)

    def forward_batch(self, primary: torch.Tensor,
                      secondary: Optional[torch.Tensor] = None,
                      ctx_tokens: Optional[torch.Tensor] = None):
        """Primary/secondary: (B, 1, H, W); ctx_tokens: (B, M, d_gen).

        Returns (class_probs (B, Q, K), boxes (B, Q, 4) cxcywh in [0,1]).
        """
        pyramid = self.backbone(primary, secondary)
        s3 = self.global_encoder(pyramid.s3)
        memory = self.pyramid_fusion(pyramid.s1, pyramid.s2, s3)
        if ctx_tokens is not None:
            memory = self.injection(memory, ctx_tokens)
        return self._decode(memory)

    forward = forward_batch

    # ----- public inference -----

    def detect(self, task: Task, inputs, unified_ctx: Optional[FusedFeatures] = None
               ) -> List[Detection]:
        """Run one clip through the detector.

        ``inputs`` is a single raster for DRC (layout) and MRC (mask), or
        a (contour, layout) pair for LRC.  ``unified_ctx`` carries the
        generator's fused features and requires a unified-mode detector.
        """
        task = Task(task)
        if task is not self.cfg.task:
            raise InputError(f"detector was built for {self.cfg.task.value}, got {task.value}")
        rasters = list(inputs) if isinstance(inputs, (list, tuple)) else [inputs]
        if len(rasters) != _TASK_ARITY[task]:
            raise InputError(
                f"{task.value} expects {_TASK_ARITY[task]} raster(s), got {len(rasters)}")
        if unified_ctx is not None and not self.cfg.unified:
            raise UsageError("unified context passed to a non-unified detector")
        primary = self._as_batch(rasters[0])
        secondary = self._as_batch(rasters[1]) if len(rasters) == 2 else None
        ctx = None
        if unified_ctx is not None:
            ctx = unified_ctx.tokens
            if ctx.dim() == 2:
                ctx = ctx[None]
        with torch.no_grad():
            probs, boxes = self.forward_batch(primary, secondary, ctx)
        return self._to_detections(probs[0], boxes[0])

    # ----- helpers -----

    @staticmethod
    def _as_batch(raster) -> torch.Tensor:
        x = raster_to_tensor(raster)
        if x.dim() == 2:
            x = x[None, None]
        elif x.dim() == 3:
            x = x[:, None]
        return x

    def _to_detections(self, probs: torch.Tensor, boxes: torch.Tensor) -> List[Detection]:
        classes = TASK_CLASSES[self.cfg.task]
        conf, idx = probs.max(dim=-1)
        out = []
        for q in range(probs.shape[0]):
            c = float(conf[q])
            klass = classes[int(idx[q])] if c >= NO_HOTSPOT_BOUNDARY else ViolationClass.NO_HOTSPOT
            out.append(Detection(klass=klass, bbox=tuple(float(v) for v in boxes[q]),
                                 confidence=c))
        return out
