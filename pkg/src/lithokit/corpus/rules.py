"""Raster-morphological rule checks producing hotspot boxes.

All three checkers share the same mechanics: find violating pixels with
binary morphology, group them 4-connectedly, emit one box per cluster, and
merge overlapping boxes of the same class. Width/spacing use the opening
test (a feature narrower than k vanishes under opening with a k-square);
area counts component pixels; the LRC stage compares the printed contour
against design intent (pinch necks, bridging corridors, displaced edges).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import InputError
from .types import BinaryRaster, HotspotAnnotation, RuleSet, Task, ViolationClass

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_SQ3 = np.ones((3, 3), dtype=bool)


def _opening(region: np.ndarray, k: int) -> np.ndarray:
    """Morphological opening with a k-square.

    The erosion treats pixels beyond the canvas as part of the region so
    that features touching the border are not eroded from outside.
    """
    st = np.ones((k, k), dtype=bool)
    er = ndimage.binary_erosion(region, st, border_value=1)
    return ndimage.binary_dilation(er, st, border_value=0)


def _boxes_overlap(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _merge_overlapping(boxes: list[tuple[int, int, int, int]]):
    """Union overlapping boxes until none overlap (one box per hotspot)."""
    merged = list(boxes)
    changed = True
    while changed:
        changed = False
        out: list[tuple[int, int, int, int]] = []
        for b in merged:
            for i, o in enumerate(out):
                if _boxes_overlap(b, o):
                    out[i] = (
                        min(b[0], o[0]),
                        min(b[1], o[1]),
                        max(b[2], o[2]),
                        max(b[3], o[3]),
                    )
                    changed = True
                    break
            else:
                out.append(b)
        merged = out
    return merged


def _cluster_boxes(pixels: np.ndarray) -> list[tuple[int, int, int, int]]:
    """One half-open bbox per cluster of violating pixels.

    Clusters are 4-connected after a 1-px dilation bridge, so violations
    separated by at most two background pixels count as one hotspot; each
    box is tight around the original (undilated) pixels.
    """
    bridged = ndimage.binary_dilation(pixels, _SQ3)
    labels, n = ndimage.label(bridged, structure=_FOUR)
    boxes = []
    for c in range(1, n + 1):
        member = pixels & (labels == c)
        if not member.any():
            continue
        ys, xs = np.nonzero(member)
        boxes.append((int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1))
    return _merge_overlapping(boxes)


def _annotate(pixels, task, klass) -> list[HotspotAnnotation]:
    return [
        HotspotAnnotation(task=task, klass=klass, bbox=b)
        for b in _cluster_boxes(pixels)
    ]


def _adjacent_labels(cluster: np.ndarray, labels: np.ndarray) -> set[int]:
    """Component labels touching the cluster's 8-neighbourhood."""
    halo = ndimage.binary_dilation(cluster, _SQ3)
    touched = np.unique(labels[halo])
    return {int(v) for v in touched if v != 0}


def _geometry_violations(img: np.ndarray, rules: RuleSet, task: Task):
    anns: list[HotspotAnnotation] = []
    fg = img > 0

    # width: material that vanishes under opening with a min_width square
    thin = fg & ~_opening(fg, rules.min_width)
    anns += _annotate(thin, task, ViolationClass.WIDTH)

    # spacing: background corridors narrower than min_spacing between two
    # distinct components (single-component pockets are same-net, ignored)
    bg = ~fg
    narrow = bg & ~_opening(bg, rules.min_spacing)
    comp_labels, _ = ndimage.label(fg, structure=_FOUR)
    gap_labels, n_gaps = ndimage.label(narrow, structure=_FOUR)
    spacing_px = np.zeros_like(fg)
    for g in range(1, n_gaps + 1):
        cluster = gap_labels == g
        if len(_adjacent_labels(cluster, comp_labels)) >= 2:
            spacing_px |= cluster
    anns += _annotate(spacing_px, task, ViolationClass.SPACING)

    # area: components smaller than min_area pixels
    small = np.zeros_like(fg)
    counts = np.bincount(comp_labels.ravel())
    for c in range(1, comp_labels.max() + 1):
        if counts[c] < rules.min_area:
            small |= comp_labels == c
    anns += _annotate(small, task, ViolationClass.AREA)
    return anns


def check_drc(layout: BinaryRaster, rules: RuleSet) -> list[HotspotAnnotation]:
    """Design-rule check on the layout: min width, spacing, area."""
    rules.validate_drc()
    return _geometry_violations(layout.pixels, rules, Task.DRC)


def check_mrc(mask: BinaryRaster, rules: RuleSet) -> list[HotspotAnnotation]:
    """Mask-rule check: same mechanics as DRC with mask-specific values."""
    rules.validate_drc()
    return _geometry_violations(mask.pixels, rules, Task.MRC)


def _edges(region: np.ndarray) -> np.ndarray:
    """Inner boundary; the canvas border itself does not count as an edge."""
    return region & ~ndimage.binary_erosion(region, _SQ3, border_value=1)


def check_lrc(
    contour: BinaryRaster, layout: BinaryRaster, rules: RuleSet
) -> list[HotspotAnnotation]:
    """Litho-rule check of the printed contour against design intent.

    pinch: printed-on-design material narrower than pinch_width;
    bridge: printed material inside a sub-bridge_gap corridor between two
    distinct layout components; epe: contour edge sites farther than
    epe_tolerance from any layout edge.
    """
    rules.validate_lrc()
    if contour.pixels.shape != layout.pixels.shape:
        raise InputError(
            f"contour {contour.pixels.shape} vs layout {layout.pixels.shape}"
        )
    anns: list[HotspotAnnotation] = []
    c = contour.pixels > 0
    l = layout.pixels > 0

    # pinch: necks in the printed material where the design is solid
    inter = c & l
    necks = inter & ~_opening(inter, rules.pinch_width)
    anns += _annotate(necks, Task.LRC, ViolationClass.PINCH)

    # bridge: contour material inside narrow corridors between components
    bg = ~l
    narrow = bg & ~_opening(bg, rules.bridge_gap)
    comp_labels, _ = ndimage.label(l, structure=_FOUR)
    gap_labels, n_gaps = ndimage.label(narrow, structure=_FOUR)
    bridge_px = np.zeros_like(l)
    for g in range(1, n_gaps + 1):
        cluster = gap_labels == g
        if len(_adjacent_labels(cluster, comp_labels)) >= 2:
            bridge_px |= cluster & c
    anns += _annotate(bridge_px, Task.LRC, ViolationClass.BRIDGE)

    # epe: contour edges farther than the tolerance from any layout edge
    e_c = _edges(c)
    e_l = _edges(l)
    if e_l.any():
        dist = ndimage.distance_transform_edt(~e_l)
    else:
        dist = np.full(e_l.shape, np.inf)
    epe_px = e_c & (dist > rules.epe_tolerance)
    anns += _annotate(epe_px, Task.LRC, ViolationClass.EPE)
    return anns
