"""Small torch building blocks shared by the generator and the detector."""

from __future__ import annotations

import math

import torch
from torch import nn


def sincos_position_2d(h: int, w: int, dim: int, device=None,
                       dtype=torch.float32) -> torch.Tensor:
    """Fixed 2-D sine/cosine positional encoding, shape (h*w, dim).

    Half the channels encode the row coordinate, half the column, each
    with a geometric frequency ladder scaled to the grid: the fastest
    component is at the two-cell Nyquist wavelength, the slowest spans
    the axis twice.  The usual language-model ladder (wavelengths up to
    10000) leaves almost every channel constant on grids this small, so
    positions become nearly indistinguishable.  Being parameter-free it
    works at any resolution, which keeps one set of weights usable for
    both the 128-px corpus and the 64-px gradient-check scale.
    """
    if dim % 4 != 0:
        raise ValueError(f"positional dim must be a multiple of 4, got {dim}")
    quarter = dim // 4
    span = float(max(h, w, 2))
    decay = torch.arange(quarter, dtype=torch.float64) / max(quarter - 1, 1)
    freqs = math.pi * torch.exp(-math.log(span) * decay)
    ys = torch.arange(h, dtype=torch.float64)[:, None] * freqs[None, :]
    xs = torch.arange(w, dtype=torch.float64)[:, None] * freqs[None, :]
    # Interleave (row_sin, row_cos, col_sin, col_cos) per frequency so that
    # any contiguous channel slice — e.g. one attention head's share — sees
    # both axes and both phases instead of a single-axis block.
    row = torch.stack([ys.sin(), ys.cos()], dim=2)  # (h, quarter, 2)
    col = torch.stack([xs.sin(), xs.cos()], dim=2)  # (w, quarter, 2)
    grid = torch.cat(
        [
            row[:, None].expand(h, w, quarter, 2),
            col[None, :].expand(h, w, quarter, 2),
        ],
        dim=3,
    )  # (h, w, quarter, 4)
    return grid.reshape(h * w, dim).to(device=device, dtype=dtype)


class TokenSelfAttention(nn.Module):
    """Pre-norm transformer block: self-attention + MLP over a token list."""

    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        if dim % heads != 0:
            raise ValueError(f"width {dim} not divisible by {heads} heads")
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        x = self.norm1(tokens)
        attn_out, _ = self.attn(x, x, x, need_weights=False)
        tokens = tokens + attn_out
        return tokens + self.mlp(self.norm2(tokens))


def straight_through_binarize(prob: torch.Tensor, threshold: float = 0.5) -> torch.Tensor:
    """Hard 0/1 values in the forward pass, identity gradient backward."""
    hard = (prob >= threshold).to(prob.dtype)
    return hard + prob - prob.detach()
