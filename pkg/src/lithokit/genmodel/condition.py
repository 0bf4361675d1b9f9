"""Process-condition encoder.

The illumination pupil raster plus one constant-valued channel per scalar
(resist threshold, focus, dose) form a four-channel image; the contour
stage appends the binarized mask prediction as a fifth channel.  A single
stem convolution carries weights for all five input channels and simply
slices them down when only four are present, so both stages share every
parameter, matching the "encoded by the same network" weight tying.
"""

from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from ..torchutil import TokenSelfAttention, sincos_position_2d
from .config import GeneratorConfig
from .types import ProcessEmbedding

# Focus is specified in nanometers (0..~100) while the other scalars are
# O(1); divide it down before the learned embedding so initialization is
# well-scaled.
FOCUS_SCALE = 100.0


class ScalarChannel(nn.Module):
    """Learned affine map from one scalar to a constant image channel."""

    def __init__(self):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(1))
        self.bias = nn.Parameter(torch.zeros(1))

    def forward(self, value: torch.Tensor, size: int) -> torch.Tensor:
        # value: (B,) -> (B, 1, size, size), spatially constant.
        v = value.reshape(-1, 1, 1, 1) * self.weight + self.bias
        return v.expand(-1, 1, size, size)


class ConditionEncoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        c1, c2, c3 = cfg.widths
        self.embed_threshold = ScalarChannel()
        self.embed_focus = ScalarChannel()
        self.embed_dose = ScalarChannel()
        # Stem weights sized for the 5-channel contour stage; the mask
        # stage uses weight[:, :4].
        self.stem_weight = nn.Parameter(torch.empty(c1, 5, 3, 3))
        self.stem_bias = nn.Parameter(torch.zeros(c1))
        nn.init.kaiming_uniform_(self.stem_weight, a=math.sqrt(5))
        self.down1 = nn.Conv2d(c1, c2, kernel_size=3, stride=2, padding=1)
        self.attn1 = TokenSelfAttention(c2, cfg.heads, cfg.mlp_ratio)
        self.down2 = nn.Conv2d(c2, c3, kernel_size=3, stride=2, padding=1)
        self.attn2 = TokenSelfAttention(c3, cfg.heads, cfg.mlp_ratio)
        self.norm = nn.LayerNorm(c3)

    def build_input(
        self,
        source: torch.Tensor,
        threshold: torch.Tensor,
        focus: torch.Tensor,
        dose: torch.Tensor,
        extra: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Assemble the 4- or 5-channel encoder input at the working size.

        source: (B, 1, h, w) pupil raster, any resolution; scalars: (B,).
        extra, when given, is the (B, 1, H, W) mask raster appended as the
        fifth channel.  Everything is nearest-neighbor resampled so pupil
        pole structure and mask edges stay crisp.
        """
        size = self.cfg.cond_input_size
        if source.shape[-2:] != (size, size):
            source = F.interpolate(source, size=(size, size), mode="nearest")
        channels = [
            source,
            self.embed_threshold(threshold, size),
            self.embed_focus(focus / FOCUS_SCALE, size),
            self.embed_dose(dose, size),
        ]
        if extra is not None:
            if extra.shape[-2:] != (size, size):
                extra = F.interpolate(extra, size=(size, size), mode="nearest")
            channels.append(extra)
        return torch.cat(channels, dim=1)

    def forward(self, cond_input: torch.Tensor) -> ProcessEmbedding:
        """cond_input: (B, 4 or 5, R, R) from :meth:`build_input`."""
        n_ch = cond_input.shape[1]
        x = F.conv2d(cond_input, self.stem_weight[:, :n_ch], self.stem_bias, padding=1)
        x = F.gelu(x)
        x = F.gelu(self.down1(x))
        b, c, h, w = x.shape
        t = x.flatten(2).transpose(1, 2)
        t = t + sincos_position_2d(h, w, c, device=x.device, dtype=x.dtype)
        t = self.attn1(t)
        x = t.transpose(1, 2).reshape(b, c, h, w)
        x = F.gelu(self.down2(x))
        b, c, h, w = x.shape
        t = x.flatten(2).transpose(1, 2)
        t = t + sincos_position_2d(h, w, c, device=x.device, dtype=x.dtype)
        t = self.attn2(t)
        return ProcessEmbedding(tokens=self.norm(t), spatial_shape=(h, w))
