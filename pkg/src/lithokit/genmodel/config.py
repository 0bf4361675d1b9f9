from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Tuple

from ..errors import ConfigurationError


@dataclass
class GeneratorConfig:
    """Desk-scale generator hyperparameters.

    The layout encoder patches at ``patch_size`` and halves the grid after
    each of the first two stages, so the final token grid is
    raster_size / (patch_size * 4).  The condition encoder consumes inputs
    at raster_size / cond_scale and downsamples by 4 internally, landing on
    the same grid, which is what the decoder upsamples back by 16.
    """

    raster_size: int = 128
    patch_size: int = 4
    widths: Tuple[int, int, int] = (48, 96, 192)
    window: int = 4
    blocks_per_stage: int = 2
    heads: int = 4
    cond_scale: int = 4
    decoder_widths: Tuple[int, int, int, int] = (96, 48, 24, 12)
    mlp_ratio: int = 4

    @property
    def model_dim(self) -> int:
        return self.widths[-1]

    @property
    def token_grid(self) -> int:
        return self.raster_size // (self.patch_size * 4)

    @property
    def cond_input_size(self) -> int:
        return self.raster_size // self.cond_scale

    def validate(self) -> "GeneratorConfig":
        stride = self.patch_size * 4
        if self.raster_size % stride != 0:
            raise ConfigurationError(
                f"raster {self.raster_size} not divisible by patch*4 = {stride}")
        grid = self.raster_size // self.patch_size
        for stage in range(3):
            if (grid >> stage) % self.window != 0:
                raise ConfigurationError(
                    f"stage {stage} grid {grid >> stage} not divisible by window {self.window}")
        for a, b in zip(self.widths, self.widths[1:]):
            if b != 2 * a:
                raise ConfigurationError(f"stage widths must double: {self.widths}")
        if self.model_dim % self.heads != 0:
            raise ConfigurationError(
                f"width {self.model_dim} not divisible by {self.heads} heads")
        if self.cond_input_size % 4 != 0:
            raise ConfigurationError(
                f"condition input {self.cond_input_size} must be divisible by 4")
        if self.cond_input_size // 4 != self.token_grid:
            raise ConfigurationError(
                "condition and layout token grids disagree; adjust cond_scale")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "GeneratorConfig":
        cfg = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()})
        return cfg.validate()
