"""Reduced residual backbone emitting stride-8/16/32 feature maps.

For LRC the stem is duplicated: contour and layout each get their own
initial convolutions, the two feature maps are concatenated and fused by
a 1×1 convolution, and everything downstream is shared.
"""

from __future__ import annotations

from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import InputError
from .config import DetectorConfig
from .types import PyramidFeatures


def _gn(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(4, channels)


class ResidualDown(nn.Module):
    """3×3–3×3 residual block with a stride-2, channel-changing shortcut."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.n1 = _gn(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.n2 = _gn(c_out)
        self.skip = nn.Conv2d(c_in, c_out, 1, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.gelu(self.n1(self.conv1(x)))
        y = self.n2(self.conv2(y))
        return F.gelu(self.skip(x) + y)


class _Stem(nn.Module):
    """Two stride-2 convolutions: raster -> stride-4 features."""

    def __init__(self, c: int):
        super().__init__()
        self.conv1 = nn.Conv2d(1, c, 3, stride=2, padding=1)
        self.n1 = _gn(c)
        self.conv2 = nn.Conv2d(c, c, 3, stride=2, padding=1)
        self.n2 = _gn(c)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.gelu(self.n1(self.conv1(x)))
        return F.gelu(self.n2(self.conv2(x)))


class Backbone(nn.Module):
    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        c1, c2, c3 = cfg.backbone_channels
        self.stem = _Stem(c1)
        if cfg.dual_branch:
            self.stem_secondary = _Stem(c1)
            self.branch_fuse = nn.Conv2d(2 * c1, c1, 1)
        else:
            self.stem_secondary = None
            self.branch_fuse = None
        self.layer1 = ResidualDown(c1, c1)  # stride 8
        self.layer2 = ResidualDown(c1, c2)  # stride 16
        self.layer3 = ResidualDown(c2, c3)  # stride 32

    def forward(self, primary: torch.Tensor,
                secondary: Optional[torch.Tensor] = None) -> PyramidFeatures:
        if (secondary is not None) != (self.stem_secondary is not None):
            raise InputError(
                "secondary input must be given exactly when the backbone is dual-branch")
        x = self.stem(primary)
        if secondary is not None:
            if secondary.shape != primary.shape:
                raise InputError(
                    f"branch shapes differ: {tuple(primary.shape)} vs {tuple(secondary.shape)}")
            y = self.stem_secondary(secondary)
            x = self.branch_fuse(torch.cat([x, y], dim=1))
        s1 = self.layer1(x)
        s2 = self.layer2(s1)
        s3 = self.layer3(s2)
        return PyramidFeatures(s1=s1, s2=s2, s3=s3)
