"""Illumination source kernels and pupil rasters.

The optical model is a normalized convolution kernel per source type:
circular sources are isotropic Gaussians whose width grows with defocus,
annular sources are a clipped difference of two Gaussians (a ring), and
bull's-eye sources blend the two. All kernels sum to 1 and are 4-fold
symmetric by construction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .types import ProcessCondition, SourceType

# Defocus widens the effective kernel: sigma = SIGMA0 + FOCUS_SLOPE * focus_nm.
SIGMA0 = 1.5
FOCUS_SLOPE = 0.02

# Annular ring: outer/inner Gaussian widths relative to the effective sigma.
ANNULAR_OUTER = 1.0
ANNULAR_INNER = 0.6

# Bull's eye = BULLSEYE_CIRC * circular + (1 - BULLSEYE_CIRC) * annular.
BULLSEYE_CIRC = 0.6

SOURCE_RASTER_SIZE = 32


def effective_sigma(focus: float) -> float:
    return SIGMA0 + FOCUS_SLOPE * focus


def _gaussian2d(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g1 = np.exp(-0.5 * (ax / sigma) ** 2)
    k = np.outer(g1, g1)
    return k / k.sum()


def source_kernel(cond: ProcessCondition, size: int) -> np.ndarray:
    """Normalized convolution kernel for a process condition.

    size must be odd; the kernel is centered, non-negative and sums to 1.
    """
    if size % 2 == 0:
        raise ConfigurationError(f"kernel size must be odd, got {size}")
    sigma = effective_sigma(cond.focus)
    if cond.source_type is SourceType.CIRCULAR:
        return _gaussian2d(size, sigma)
    if cond.source_type is SourceType.ANNULAR:
        outer = _gaussian2d(size, ANNULAR_OUTER * sigma)
        inner = _gaussian2d(size, ANNULAR_INNER * sigma)
        ring = np.clip(outer - inner, 0.0, None)
        total = ring.sum()
        if total <= 0:  # degenerate only if inner/outer coincide
            raise ConfigurationError("annular kernel collapsed to zero")
        return ring / total
    if cond.source_type is SourceType.BULLSEYE:
        circ = _gaussian2d(size, sigma)
        outer = _gaussian2d(size, ANNULAR_OUTER * sigma)
        inner = _gaussian2d(size, ANNULAR_INNER * sigma)
        ring = np.clip(outer - inner, 0.0, None)
        ring = ring / ring.sum()
        return BULLSEYE_CIRC * circ + (1.0 - BULLSEYE_CIRC) * ring
    raise ConfigurationError(f"unknown source type {cond.source_type}")


def default_kernel_size(focus: float) -> int:
    """Odd kernel size covering +/- 3 sigma of the widest Gaussian."""
    sigma = effective_sigma(focus)
    r = int(np.ceil(3.0 * sigma))
    return 2 * r + 1


def kernel_second_moment(kernel: np.ndarray) -> float:
    """Radial second moment; grows with kernel spread."""
    n = kernel.shape[0]
    r = n // 2
    ax = np.arange(-r, r + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    return float((kernel * (xx**2 + yy**2)).sum())


def render_source_raster(source_type: SourceType, size: int = SOURCE_RASTER_SIZE) -> np.ndarray:
    """Fixed pupil-shape raster in [0, 1]; depends only on (source_type, size).

    Rendered at the zero-focus sigma scaled to the raster so the three pupil
    shapes stay visually distinct for the condition encoder.
    """
    sigma = size / 8.0
    r = (size - 1) / 2.0
    ax = np.arange(size, dtype=np.float64) - r
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    rho2 = xx**2 + yy**2
    disk = np.exp(-0.5 * rho2 / sigma**2)
    # Unnormalized difference of Gaussians is zero at the center and forms a
    # ring; non-negative because the outer sigma is the larger one.
    ring = np.exp(-0.5 * rho2 / (ANNULAR_OUTER * sigma) ** 2) - np.exp(
        -0.5 * rho2 / (ANNULAR_INNER * sigma) ** 2
    )
    ring = ring / max(ring.max(), 1e-12)
    if source_type is SourceType.CIRCULAR:
        img = disk
    elif source_type is SourceType.ANNULAR:
        img = ring
    elif source_type is SourceType.BULLSEYE:
        img = BULLSEYE_CIRC * disk + (1.0 - BULLSEYE_CIRC) * ring
    else:
        raise ConfigurationError(f"unknown source type {source_type}")
    peak = img.max()
    return (img / peak if peak > 0 else img).astype(np.float64)
