"""Global context encoder, pyramid fusion, and generator-feature injection."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import UsageError
from ..torchutil import sincos_position_2d
from .config import DetectorConfig


class GlobalEncoder(nn.Module):
    """Exactly one transformer layer over the flattened S3 map.

    The most recent per-head attention weights are kept on
    ``last_attention`` (detached, shape (B, heads, T, T)) so tests can
    check row normalization and layer count by introspection.
    """

    layer_count = 1

    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )
        self.last_attention = None

    def forward(self, s3: torch.Tensor) -> torch.Tensor:
        b, c, h, w = s3.shape
        tokens = s3.flatten(2).transpose(1, 2)
        tokens = tokens + sincos_position_2d(h, w, c, device=s3.device, dtype=s3.dtype)
        x = self.norm1(tokens)
        att, weights = self.attn(x, x, x, need_weights=True, average_attn_weights=False)
        self.last_attention = weights.detach()
        tokens = tokens + att
        tokens = tokens + self.mlp(self.norm2(tokens))
        return tokens.transpose(1, 2).reshape(b, c, h, w)


class PyramidFusion(nn.Module):
    """Resample S1 down and S3 up to the S2 grid and fuse by 1×1 conv."""

    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        c1, c2, c3 = cfg.backbone_channels
        self.proj = nn.Conv2d(c1 + c2 + c3, cfg.width, 1)

    def forward(self, s1: torch.Tensor, s2: torch.Tensor, s3: torch.Tensor) -> torch.Tensor:
        down = F.avg_pool2d(s1, kernel_size=2, stride=2)
        up = F.interpolate(s3, size=s2.shape[-2:], mode="nearest")
        return self.proj(torch.cat([down, s2, up], dim=1))


class GeneratorInjection(nn.Module):
    """Concat-and-fuse of projected generator tokens into the memory map.

    The fusion convolution starts as an exact identity on the memory half
    (and zero on the context half), so an untrained injection — or zeroed
    context — leaves the detector's behavior bit-for-bit unchanged.
    """

    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        self.enabled = cfg.unified
        if not self.enabled:
            return
        self.proj = nn.Linear(cfg.generator_dim, cfg.width)
        self.fuse = nn.Conv2d(2 * cfg.width, cfg.width, 1)
        with torch.no_grad():
            self.fuse.weight.zero_()
            self.fuse.weight[:, : cfg.width, 0, 0] = torch.eye(cfg.width)
            self.fuse.bias.zero_()

    def forward(self, memory: torch.Tensor, fused_tokens: torch.Tensor) -> torch.Tensor:
        if not self.enabled:
            raise UsageError("generator injection called on a non-unified detector")
        if fused_tokens.dim() == 2:
            fused_tokens = fused_tokens[None]
        b, m2, _ = fused_tokens.shape
        m = math.isqrt(m2)
        ctx = self.proj(fused_tokens)  # (B, M, width)
        ctx = ctx.transpose(1, 2).reshape(b, -1, m, m)
        ctx = F.interpolate(ctx, size=memory.shape[-2:], mode="nearest")
        return self.fuse(torch.cat([memory, ctx], dim=1))
