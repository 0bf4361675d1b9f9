"""Token-to-raster decoder: four 2× transposed-conv steps with residual
blocks, one global attention block at the quarter-resolution stage, and a
sigmoid head."""

from __future__ import annotations

import math
from typing import Tuple

import torch
from torch import nn

from ..errors import ConfigurationError
from ..torchutil import TokenSelfAttention, sincos_position_2d
from .config import GeneratorConfig
from .types import FusedFeatures


def _gn(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(4, channels)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            _gn(channels),
            nn.GELU(),
            nn.Conv2d(channels, channels, 3, padding=1),
            _gn(channels),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.nn.functional.gelu(x + self.body(x))


class _Upsample(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.up = nn.ConvTranspose2d(c_in, c_out, kernel_size=2, stride=2)
        self.norm = _gn(c_out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.nn.functional.gelu(self.norm(self.up(x)))


class RasterDecoder(nn.Module):
    """Upsamples an m×m token grid by 16× to an (H, W) probability raster."""

    UPSCALE = 16

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        d = cfg.model_dim
        w1, w2, w3, w4 = cfg.decoder_widths
        self.up1 = _Upsample(d, w1)
        self.res1 = ResidualBlock(w1)
        self.attn = TokenSelfAttention(w1, cfg.heads, cfg.mlp_ratio)
        self.up2 = _Upsample(w1, w2)
        self.res2 = ResidualBlock(w2)
        self.up3 = _Upsample(w2, w3)
        self.res3 = ResidualBlock(w3)
        self.up4 = _Upsample(w3, w4)
        self.res4 = ResidualBlock(w4)
        self.head = nn.Conv2d(w4, 1, kernel_size=1)
        # Corpus rasters are mostly dark; bias the head toward the empty
        # prior so early training is not dominated by saturated pixels.
        nn.init.constant_(self.head.bias, -1.0)

    def forward(self, fused: FusedFeatures, target_shape: Tuple[int, int]) -> torch.Tensor:
        tokens = fused.tokens
        squeeze = tokens.dim() == 2
        if squeeze:
            tokens = tokens[None]
        b, m2, d = tokens.shape
        m = math.isqrt(m2)
        if m * m != m2:
            raise ConfigurationError(f"{m2} fused tokens do not form a square grid")
        th, tw = target_shape
        if (th, tw) != (m * self.UPSCALE, m * self.UPSCALE):
            raise ConfigurationError(
                f"target {target_shape} unreachable from a {m}x{m} grid "
                f"(ladder produces {m * self.UPSCALE})")
        x = tokens.transpose(1, 2).reshape(b, d, m, m)
        x = self.res1(self.up1(x))
        bb, c, h, w = x.shape
        t = x.flatten(2).transpose(1, 2)
        t = t + sincos_position_2d(h, w, c, device=x.device, dtype=x.dtype)
        x = self.attn(t).transpose(1, 2).reshape(bb, c, h, w)
        x = self.res2(self.up2(x))
        x = self.res3(self.up3(x))
        x = self.res4(self.up4(x))
        prob = torch.sigmoid(self.head(x))[:, 0]
        return prob[0] if squeeze else prob
