"""Procedural Manhattan layout generation with optional planted defects.

Shapes are axis-aligned rectangles plus L and T compositions, snapped to a
placement grid and kept legally wide/spaced so that a clean layout passes
the DRC rules it was generated against. With a configurable probability a
sample additionally receives planted sub-minimum width or spacing defects,
whose locations are recorded for label-soundness checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import ConfigurationError
from .types import BinaryRaster, HotspotAnnotation, Task, ViolationClass


@dataclass
class LayoutConfig:
    size: int = 128
    grid: int = 4
    pitch: float = 4.0  # nm per pixel
    wire_width: tuple[int, int] = (8, 16)
    wire_length: tuple[int, int] = (16, 56)
    density: float = 0.18
    injection_rate: float = 0.5
    max_defects: int = 2
    min_width: int = 6  # legal floor for placed shapes
    min_spacing: int = 6  # clearance kept between placed shapes
    margin: int = 4
    max_attempts: int = 300

    def validate(self):
        if self.size <= 0 or self.grid <= 0 or self.pitch <= 0:
            raise ConfigurationError("size, grid and pitch must be positive")
        if self.wire_width[0] <= 0 or self.wire_width[1] < self.wire_width[0]:
            raise ConfigurationError(f"bad wire_width range {self.wire_width}")
        if self.wire_length[0] <= 0 or self.wire_length[1] < self.wire_length[0]:
            raise ConfigurationError(f"bad wire_length range {self.wire_length}")
        if self.density < 0 or not 0 <= self.injection_rate <= 1:
            raise ConfigurationError("density must be >= 0, injection_rate in [0,1]")
        if self.min_width <= 1 or self.min_spacing <= 1:
            raise ConfigurationError("min_width and min_spacing must exceed 1")


@dataclass
class GeneratedLayout:
    raster: BinaryRaster
    planted: list[HotspotAnnotation] = field(default_factory=list)


def _square(n: int) -> np.ndarray:
    return np.ones((n, n), dtype=bool)


def _snap(rng: np.random.Generator, lo: int, hi: int, grid: int) -> int:
    lo_g = max(1, lo // grid)
    hi_g = max(lo_g, hi // grid)
    return int(rng.integers(lo_g, hi_g + 1)) * grid


def _place(canvas: np.ndarray, patch_bbox, clearance: int) -> bool:
    """True if the patch cells are clear of existing pattern by `clearance`."""
    x0, y0, x1, y1 = patch_bbox
    gx0 = max(0, x0 - clearance)
    gy0 = max(0, y0 - clearance)
    gx1 = min(canvas.shape[1], x1 + clearance)
    gy1 = min(canvas.shape[0], y1 + clearance)
    return not canvas[gy0:gy1, gx0:gx1].any()


class _Painter:
    """Tracks painted rectangles and enforces clearance between shapes."""

    def __init__(self, size: int, clearance: int):
        self.canvas = np.zeros((size, size), dtype=np.uint8)
        self.size = size
        self.clearance = clearance

    def try_paint(self, rects: list[tuple[int, int, int, int]]) -> bool:
        """Paint all rects of one shape if each clears existing pattern."""
        for x0, y0, x1, y1 in rects:
            if x0 < 0 or y0 < 0 or x1 > self.size or y1 > self.size:
                return False
            if not _place(self.canvas, (x0, y0, x1, y1), self.clearance):
                return False
        for x0, y0, x1, y1 in rects:
            self.canvas[y0:y1, x0:x1] = 1
        return True


def _shape_rects(rng, cfg: LayoutConfig, x0: int, y0: int, kind: str):
    g = cfg.grid
    w = _snap(rng, max(cfg.wire_width[0], cfg.min_width), cfg.wire_width[1], g)
    length = _snap(rng, cfg.wire_length[0], cfg.wire_length[1], g)
    horizontal = bool(rng.integers(0, 2))
    if horizontal:
        main = (x0, y0, x0 + length, y0 + w)
    else:
        main = (x0, y0, x0 + w, y0 + length)
    if kind == "rect":
        return [main]
    w2 = _snap(rng, max(cfg.wire_width[0], cfg.min_width), cfg.wire_width[1], g)
    arm = _snap(rng, cfg.wire_length[0], cfg.wire_length[1], g)
    mx0, my0, mx1, my1 = main
    if kind == "L":
        # second leg grows from one end of the main wire
        if horizontal:
            return [main, (mx1 - w2, my1, mx1, my1 + arm)]
        return [main, (mx1, my1 - w2, mx1 + arm, my1)]
    # T: stem centered on the bar, snapped to grid
    if horizontal:
        cx = mx0 + ((mx1 - mx0) // 2 // g) * g
        return [main, (cx, my1, cx + w2, my1 + arm)]
    cy = my0 + ((my1 - my0) // 2 // g) * g
    return [main, (mx1, cy, mx1 + arm, cy + w2)]


def _plant_width_defect(rng, painter: _Painter, cfg: LayoutConfig):
    """Standalone wire thinner than min_width; returns its bbox or None."""
    w_def = int(rng.integers(2, cfg.min_width))
    length = int(rng.integers(12, 25))
    horizontal = bool(rng.integers(0, 2))
    for _ in range(200):
        x0 = int(rng.integers(cfg.margin, cfg.size - cfg.margin - length))
        y0 = int(rng.integers(cfg.margin, cfg.size - cfg.margin - length))
        rect = (
            (x0, y0, x0 + length, y0 + w_def)
            if horizontal
            else (x0, y0, x0 + w_def, y0 + length)
        )
        if painter.try_paint([rect]):
            return rect
    return None


def _plant_spacing_defect(rng, painter: _Painter, cfg: LayoutConfig):
    """Two legal blocks separated by a sub-minimum gap; returns the gap bbox."""
    side = max(cfg.min_width, cfg.grid * 2)
    gap = int(rng.integers(2, cfg.min_spacing))
    for _ in range(200):
        x0 = int(rng.integers(cfg.margin, cfg.size - cfg.margin - (2 * side + gap)))
        y0 = int(rng.integers(cfg.margin, cfg.size - cfg.margin - side))
        b1 = (x0, y0, x0 + side, y0 + side)
        b2 = (x0 + side + gap, y0, x0 + 2 * side + gap, y0 + side)
        # the pair is checked against the existing pattern only, so the two
        # blocks may deliberately sit closer than the legal clearance
        if painter.try_paint([b1, b2]):
            return (x0 + side, y0, x0 + side + gap, y0 + side)
    return None


def generate_layout(seed: int, cfg: LayoutConfig) -> GeneratedLayout:
    """Deterministic Manhattan layout for one sample seed.

    Returns the raster plus any planted DRC defects (recorded as width /
    spacing annotations covering the defect location).
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    painter = _Painter(cfg.size, cfg.min_spacing)

    planted: list[HotspotAnnotation] = []
    if cfg.density > 0:
        target = cfg.density * cfg.size * cfg.size
        kinds = ("rect", "rect", "L", "T")
        for _ in range(cfg.max_attempts):
            if painter.canvas.sum() >= target:
                break
            kind = kinds[int(rng.integers(0, len(kinds)))]
            x0 = int(rng.integers(cfg.margin // cfg.grid, cfg.size // cfg.grid)) * cfg.grid
            y0 = int(rng.integers(cfg.margin // cfg.grid, cfg.size // cfg.grid)) * cfg.grid
            painter.try_paint(_shape_rects(rng, cfg, x0, y0, kind))

        if rng.random() < cfg.injection_rate:
            n_def = int(rng.integers(1, cfg.max_defects + 1))
            for _ in range(n_def):
                if rng.random() < 0.5:
                    bbox = _plant_width_defect(rng, painter, cfg)
                    klass = ViolationClass.WIDTH
                    if bbox is None:  # fall back to the smaller-footprint kind
                        bbox = _plant_spacing_defect(rng, painter, cfg)
                        klass = ViolationClass.SPACING
                else:
                    bbox = _plant_spacing_defect(rng, painter, cfg)
                    klass = ViolationClass.SPACING
                    if bbox is None:
                        bbox = _plant_width_defect(rng, painter, cfg)
                        klass = ViolationClass.WIDTH
                if bbox is not None:
                    planted.append(
                        HotspotAnnotation(task=Task.DRC, klass=klass, bbox=bbox)
                    )

    raster = BinaryRaster(painter.canvas, pitch=cfg.pitch)
    return GeneratedLayout(raster=raster, planted=planted)


def fill_fraction(raster: BinaryRaster) -> float:
    return float(raster.pixels.mean())


def components(pixels: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labelling used throughout the rule checks."""
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    return ndimage.label(pixels > 0, structure=structure)
