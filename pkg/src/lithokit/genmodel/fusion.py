"""Cross-attention fusion of process queries with layout keys/values.

The attention kernel itself — softmax(Q Kᵀ / √d_k) V — lives in
:func:`scaled_dot_attention` so tests can evaluate it directly against
hand-worked matrices; the module wraps it with the usual projections,
a residual connection, and a post-norm, and keeps the per-head
row-stochastic maps on the output for inspection and for the detector's
feature injection.

Grid positions are re-added to queries and keys right before the
projections (values stay position-free), with a gain that makes the
position-position term dominate the initial logits.  Without this the
layout's geometry reaches the decoder only through whatever positional
residue survives the encoders, attention starts uniform, and every fused
token sees the same layout average — the model then converges to a
layout-independent output.
"""

from __future__ import annotations

import math
from typing import Tuple

import torch
from torch import nn

from ..errors import ConfigurationError
from ..torchutil import sincos_position_2d
from .types import FusedFeatures, LayoutEmbedding, ProcessEmbedding

# Gain on the sincos vectors added to queries and keys.  The encoder tokens
# come out of a LayerNorm with per-token norm ~sqrt(dim), an order of
# magnitude above unit-scale sincos entries; unscaled positions get buried
# in content noise and attention starts effectively unstructured.  At gain 3
# the position-position term dominates the initial logits, so attention
# starts aligned to matching grid cells and each fused token carries its
# local layout patch from step one.
POSITION_GAIN = 3.0


def scaled_dot_attention(q: torch.Tensor, k: torch.Tensor,
                         v: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Single attention evaluation on already-projected matrices.

    q: (..., M, d_k), k: (..., N, d_k), v: (..., N, d_v).
    Returns (output (..., M, d_v), weights (..., M, N)); each weight row
    sums to 1.
    """
    d_k = q.shape[-1]
    logits = q @ k.transpose(-2, -1) / math.sqrt(d_k)
    weights = torch.softmax(logits, dim=-1)
    return weights @ v, weights


class CrossAttentionFusion(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError(f"width {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.norm = nn.LayerNorm(dim)
        # Identity init: with the sincos terms on q and k, attention starts
        # biased toward matching grid positions, so each fused token begins
        # as "process content + local layout content".  Random projections
        # start with near-uniform attention instead, and the decoder then
        # sees only a global layout average — training has to first discover
        # position alignment, which dominates the optimization budget.
        for lin in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
            nn.init.eye_(lin.weight)
            nn.init.zeros_(lin.bias)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        # (..., T, dim) -> (..., heads, T, dim/heads)
        *lead, t, _ = x.shape
        x = x.view(*lead, t, self.heads, self.dim // self.heads)
        return x.transpose(-3, -2)

    def _positions(self, shape, like: torch.Tensor) -> torch.Tensor:
        h, w = shape
        return sincos_position_2d(h, w, self.dim, device=like.device,
                                  dtype=like.dtype)

    def forward(self, proc: ProcessEmbedding, lay: LayoutEmbedding) -> FusedFeatures:
        pt, lt = proc.tokens, lay.tokens
        if pt.shape[-1] != self.dim or lt.shape[-1] != self.dim:
            raise ConfigurationError(
                f"token width mismatch: proc {pt.shape[-1]}, layout {lt.shape[-1]}, "
                f"fusion built for {self.dim}")
        q_in = pt + POSITION_GAIN * self._positions(proc.spatial_shape, pt)
        k_in = lt + POSITION_GAIN * self._positions(lay.spatial_shape, lt)
        q = self._split(self.q_proj(q_in))
        k = self._split(self.k_proj(k_in))
        v = self._split(self.v_proj(lt))
        out, weights = scaled_dot_attention(q, k, v)
        out = out.transpose(-3, -2).reshape(*pt.shape)
        fused = self.norm(pt + self.out_proj(out))
        return FusedFeatures(tokens=fused, attention_maps=weights)
