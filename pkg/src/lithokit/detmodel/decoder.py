"""Query-based set-prediction decoder: no anchors, no NMS, one detection
per learned query."""

from __future__ import annotations

import torch
from torch import nn

from .config import DetectorConfig
from .types import QuerySet


class DecoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.norm_self = nn.LayerNorm(dim)
        self.self_attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm_cross = nn.LayerNorm(dim)
        self.cross_attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm_mlp = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, queries: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        q = self.norm_self(queries)
        sa, _ = self.self_attn(q, q, q, need_weights=False)
        queries = queries + sa
        q = self.norm_cross(queries)
        ca, _ = self.cross_attn(q, memory, memory, need_weights=False)
        queries = queries + ca
        return queries + self.mlp(self.norm_mlp(queries))


class QueryDecoder(nn.Module):
    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        self.cfg = cfg
        self.query_embed = nn.Parameter(torch.randn(cfg.queries, cfg.width) * 0.02)
        self.layers = nn.ModuleList(
            DecoderLayer(cfg.width, cfg.heads) for _ in range(cfg.decoder_layers))
        self.norm = nn.LayerNorm(cfg.width)
        self.class_head = nn.Linear(cfg.width, cfg.num_classes)
        self.box_head = nn.Sequential(
            nn.Linear(cfg.width, cfg.width),
            nn.GELU(),
            nn.Linear(cfg.width, 4),
        )
        # Start with low class scores everywhere: most queries on most
        # clips are background, and a pessimistic prior stabilizes the
        # first matching steps.
        nn.init.constant_(self.class_head.bias, -2.0)

    @property
    def query_set(self) -> QuerySet:
        return QuerySet(count=self.cfg.queries, embeddings=self.query_embed)

    def forward(self, memory_tokens: torch.Tensor, queries: torch.Tensor = None):
        """memory_tokens: (B, T, width) with positions already added.

        Returns (class_probs (B, Q, K) via sigmoid, boxes (B, Q, 4) in
        normalized cxcywh).  Every query yields exactly one output row;
        nothing is suppressed or reordered.
        """
        b = memory_tokens.shape[0]
        if queries is None:
            queries = self.query_embed
        q = queries[None].expand(b, -1, -1)
        for layer in self.layers:
            q = layer(q, memory_tokens)
        q = self.norm(q)
        class_probs = torch.sigmoid(self.class_head(q))
        boxes = torch.sigmoid(self.box_head(q))
        return class_probs, boxes
