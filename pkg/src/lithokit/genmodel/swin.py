"""Hierarchical windowed-attention encoder for layout rasters.

Three stages of window-local self-attention; every second block shifts
the window grid by half a window (cyclic roll) so context crosses window
boundaries, and a 2×2 patch merge between stages halves the grid while
doubling the channel width.  The shift is implemented as a plain roll
without the boundary attention mask of the original formulation — at
desk scale the wrap-around mixing is harmless and keeps the code small.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ConfigurationError
from ..torchutil import sincos_position_2d
from .config import GeneratorConfig
from .types import LayoutEmbedding


def window_partition(x: torch.Tensor, window: int) -> torch.Tensor:
    """(B, H, W, C) -> (B * nWindows, window*window, C)."""
    b, h, w, c = x.shape
    x = x.view(b, h // window, window, w // window, window, c)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(-1, window * window, c)


def window_merge(win: torch.Tensor, window: int, h: int, w: int) -> torch.Tensor:
    """Inverse of :func:`window_partition`."""
    b = win.shape[0] // ((h // window) * (w // window))
    x = win.view(b, h // window, w // window, window, window, -1)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(b, h, w, -1)


class WindowBlock(nn.Module):
    """Pre-norm window attention + MLP; shifts the grid when ``shift`` > 0."""

    def __init__(self, dim: int, heads: int, window: int, shift: int, mlp_ratio: int):
        super().__init__()
        self.window = window
        self.shift = shift
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, h, w, c = x.shape
        shortcut = x
        x = self.norm1(x)
        if self.shift:
            x = torch.roll(x, shifts=(-self.shift, -self.shift), dims=(1, 2))
        win = window_partition(x, self.window)
        att, _ = self.attn(win, win, win, need_weights=False)
        x = window_merge(att, self.window, h, w)
        if self.shift:
            x = torch.roll(x, shifts=(self.shift, self.shift), dims=(1, 2))
        x = shortcut + x
        return x + self.mlp(self.norm2(x))


class PatchMerging(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(4 * dim)
        self.reduce = nn.Linear(4 * dim, 2 * dim, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, h, w, c = x.shape
        x = x.view(b, h // 2, 2, w // 2, 2, c)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(b, h // 2, w // 2, 4 * c)
        return self.reduce(self.norm(x))


class LayoutEncoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        c1, c2, c3 = cfg.widths
        self.patch_embed = nn.Conv2d(1, c1, kernel_size=cfg.patch_size, stride=cfg.patch_size)
        half = cfg.window // 2

        def stage(dim):
            blocks = []
            for i in range(cfg.blocks_per_stage):
                blocks.append(WindowBlock(dim, cfg.heads, cfg.window,
                                          half if i % 2 else 0, cfg.mlp_ratio))
            return nn.ModuleList(blocks)

        self.stage1 = stage(c1)
        self.merge1 = PatchMerging(c1)
        self.stage2 = stage(c2)
        self.merge2 = PatchMerging(c2)
        self.stage3 = stage(c3)
        self.norm = nn.LayerNorm(c3)

    def forward(self, layout: torch.Tensor) -> LayoutEmbedding:
        """layout: (B, 1, H, W) in {0,1} -> tokens (B, N, d)."""
        b, _, h, w = layout.shape
        stride = self.cfg.patch_size * 4
        if h % stride or w % stride:
            raise ConfigurationError(
                f"layout side {h}x{w} not divisible by patch*merges = {stride}")
        grid_h, grid_w = h // self.cfg.patch_size, w // self.cfg.patch_size
        if grid_h % self.cfg.window or (grid_h // 4) % self.cfg.window:
            raise ConfigurationError(
                f"token grid {grid_h} incompatible with window {self.cfg.window}")

        x = self.patch_embed(layout)  # (B, c1, gh, gw)
        x = x.permute(0, 2, 3, 1)  # (B, gh, gw, c1)
        pos = sincos_position_2d(grid_h, grid_w, x.shape[-1],
                                 device=x.device, dtype=x.dtype)
        x = x + pos.view(grid_h, grid_w, -1)
        for blk in self.stage1:
            x = blk(x)
        x = self.merge1(x)
        for blk in self.stage2:
            x = blk(x)
        x = self.merge2(x)
        for blk in self.stage3:
            x = blk(x)
        x = self.norm(x)
        gh, gw = x.shape[1], x.shape[2]
        return LayoutEmbedding(tokens=x.reshape(b, gh * gw, -1), spatial_shape=(gh, gw))
