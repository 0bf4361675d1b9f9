"""Forward lithography model and pixel-based mask correction.

The print model is deliberately lightweight: the aerial image is the mask
convolved with a process-dependent source kernel (zero-padded), scaled by
dose, and the resist contour is a hard threshold of that image. A module
level call counter makes it possible to assert that training stages which
must not touch the simulator really don't.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from .sources import default_kernel_size, source_kernel
from .types import BinaryRaster, ProcessCondition

_SQ3 = np.ones((3, 3), dtype=bool)

_sim_calls = 0


def simulator_call_count() -> int:
    """Total number of contour simulations since import (monotonic)."""
    return _sim_calls


@lru_cache(maxsize=64)
def _cached_kernel(source_type: str, focus: float, size: int) -> np.ndarray:
    from .types import SourceType

    probe = ProcessCondition(
        source_type=SourceType(source_type), resist_threshold=0.5, focus=focus, dose=1.0
    )
    k = source_kernel(probe, size)
    k.setflags(write=False)
    return k


def aerial_image(mask: BinaryRaster, cond: ProcessCondition) -> np.ndarray:
    """Dose-scaled intensity field of the mask under the given condition."""
    size = default_kernel_size(cond.focus)
    kernel = _cached_kernel(cond.source_type.value, cond.focus, size)
    field = ndimage.convolve(
        mask.pixels.astype(np.float64), kernel, mode="constant", cval=0.0
    )
    return cond.dose * field


def simulate_contour(mask: BinaryRaster, cond: ProcessCondition) -> BinaryRaster:
    """Resist contour: pixels whose aerial intensity reaches the threshold."""
    global _sim_calls
    _sim_calls += 1
    field = aerial_image(mask, cond)
    return BinaryRaster((field >= cond.resist_threshold).astype(np.uint8), pitch=mask.pitch)


def contour_error(layout: BinaryRaster, contour: BinaryRaster) -> int:
    """Pixel-count mismatch between design intent and printed contour."""
    return int(np.logical_xor(layout.pixels > 0, contour.pixels > 0).sum())


def run_opc(
    layout: BinaryRaster, cond: ProcessCondition, iterations: int = 10
) -> BinaryRaster:
    """Greedy pixel-flip optical proximity correction.

    Starting from the layout itself, each iteration prints the current mask,
    grows the mask boundary next to under-printing regions and trims it next
    to over-printing regions. An update is kept only if it does not increase
    the print error, so the returned mask never prints worse than the
    uncorrected layout.
    """
    if iterations < 0:
        raise ConfigurationError(f"iterations must be >= 0, got {iterations}")
    target = layout.pixels > 0
    if iterations == 0:
        return BinaryRaster(target.astype(np.uint8), pitch=layout.pitch)

    def _print(m: np.ndarray) -> np.ndarray:
        return simulate_contour(BinaryRaster(m.astype(np.uint8), layout.pitch), cond).pixels > 0

    mask = target.copy()
    printed = _print(mask)
    err = int(np.logical_xor(printed, target).sum())

    near_target = ndimage.binary_dilation(target, _SQ3, iterations=4)
    st2 = np.ones((2, 2), dtype=bool)

    for _ in range(iterations):
        if err == 0:
            break
        under = target & ~printed
        over = printed & ~target
        # candidate additions: the outer boundary of the mask near underprint
        grow = ndimage.binary_dilation(mask, _SQ3) & ~mask
        grow &= ndimage.binary_dilation(under, _SQ3, iterations=2)
        # candidate removals: the inner boundary near overprint (biasing the
        # mask inside the design is exactly what corrects a fat print)
        inner = mask & ~ndimage.binary_erosion(mask, _SQ3, border_value=1)
        shrink = inner & ndimage.binary_dilation(over, _SQ3, iterations=2)
        new_mask = (mask | grow) & ~shrink
        # regularize: close 1-px notches, open 1-px nubs, and drop any
        # fragment the edge biasing detached from the design neighbourhood
        new_mask = ndimage.binary_opening(ndimage.binary_closing(new_mask, st2), st2)
        labels, n = ndimage.label(new_mask, structure=np.ones((3, 3), bool))
        if n:
            keep = np.unique(labels[new_mask & near_target])
            new_mask = np.isin(labels, keep[keep > 0])
        if np.array_equal(new_mask, mask):
            break
        new_printed = _print(new_mask)
        new_err = int(np.logical_xor(new_printed, target).sum())
        if new_err > err:
            break  # oscillation onset: keep the better current mask
        mask, printed, err = new_mask, new_printed, new_err

    return BinaryRaster(mask.astype(np.uint8), pitch=layout.pitch)
