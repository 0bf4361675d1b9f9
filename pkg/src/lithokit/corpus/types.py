"""Domain types for the synthetic lithography corpus."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, InputError

VALID_RASTER_SIZES = (64, 128, 256, 512)


class SourceType(str, Enum):
    ANNULAR = "annular"
    CIRCULAR = "circular"
    BULLSEYE = "bullseye"


class Task(str, Enum):
    DRC = "drc"
    MRC = "mrc"
    LRC = "lrc"


class ViolationClass(str, Enum):
    WIDTH = "width"
    SPACING = "spacing"
    AREA = "area"
    PINCH = "pinch"
    BRIDGE = "bridge"
    EPE = "epe"
    NO_HOTSPOT = "no-hotspot"


# LRC boxes carry pinch/bridge/epe; DRC and MRC carry width/spacing/area.
TASK_CLASSES = {
    Task.DRC: (ViolationClass.WIDTH, ViolationClass.SPACING, ViolationClass.AREA),
    Task.MRC: (ViolationClass.WIDTH, ViolationClass.SPACING, ViolationClass.AREA),
    Task.LRC: (ViolationClass.PINCH, ViolationClass.BRIDGE, ViolationClass.EPE),
}


@dataclass
class BinaryRaster:
    """Square H×W binary image (layout, mask, or contour).

    pixels holds 0/1 uint8; pitch is nm per pixel.
    """

    pixels: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise InputError(f"raster must be 2-D, got shape {self.pixels.shape}")
        h, w = self.pixels.shape
        if h != w:
            raise ConfigurationError(f"raster must be square, got {h}x{w}")
        if h not in VALID_RASTER_SIZES:
            raise ConfigurationError(
                f"raster side {h} not in supported sizes {VALID_RASTER_SIZES}"
            )
        vals = np.unique(self.pixels)
        if not np.isin(vals, (0, 1)).all():
            raise InputError("raster pixels must be 0/1")
        self.pixels = self.pixels.astype(np.uint8)

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    def astype_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryRaster):
            return NotImplemented
        return self.pitch == other.pitch and np.array_equal(self.pixels, other.pixels)


@dataclass
class ProcessCondition:
    """One point of the process grid; conditions every generation.

    resist_threshold is the effective (calibrated) intensity threshold used
    by the contour oracle. focus is in nm, dose a dimensionless multiplier.
    source_raster is the rendered illumination pupil in [0, 1], deterministic
    given (source_type, resolution).
    """

    source_type: SourceType
    resist_threshold: float
    focus: float
    dose: float
    source_raster: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not 0.0 < self.resist_threshold < 1.0:
            raise ConfigurationError(
                f"resist_threshold must be in (0,1), got {self.resist_threshold}"
            )
        if self.dose <= 0:
            raise ConfigurationError(f"dose must be > 0, got {self.dose}")
        if self.focus < 0:
            raise ConfigurationError(f"focus must be >= 0, got {self.focus}")
        if self.source_raster is None:
            from .sources import render_source_raster

            self.source_raster = render_source_raster(self.source_type)

    def key(self) -> str:
        return (
            f"{self.source_type.value}_{self.resist_threshold:.7g}"
            f"_{self.focus:g}_{self.dose:g}"
        )


@dataclass(frozen=True)
class HotspotAnnotation:
    """One labelled violation: task, class, and an axis-aligned box.

    Boxes are half-open pixel coordinates (x_min, y_min, x_max, y_max), so a
    box area in px equals (x_max - x_min) * (y_max - y_min).
    """

    task: Task
    klass: ViolationClass
    bbox: tuple[int, int, int, int]

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise InputError(f"degenerate bbox {self.bbox}")
        if self.klass not in TASK_CLASSES[self.task]:
            raise InputError(f"class {self.klass} invalid for task {self.task}")

    @property
    def area(self) -> int:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)


@dataclass
class RuleSet:
    """Geometric rule values in pixels for one check stage."""

    min_width: int = 0
    min_spacing: int = 0
    min_area: int = 0
    pinch_width: int = 0
    bridge_gap: int = 0
    epe_tolerance: int = 0

    def validate_drc(self):
        if min(self.min_width, self.min_spacing, self.min_area) <= 0:
            raise ConfigurationError(
                "min_width, min_spacing, min_area must all be positive"
            )

    def validate_lrc(self):
        if min(self.pinch_width, self.bridge_gap, self.epe_tolerance) <= 0:
            raise ConfigurationError(
                "pinch_width, bridge_gap, epe_tolerance must all be positive"
            )


@dataclass
class Sample:
    """One layout-mask-contour triplet with condition and annotations."""

    id: str
    layout: BinaryRaster
    mask: BinaryRaster
    contour: BinaryRaster
    condition: ProcessCondition
    annotations: list[HotspotAnnotation]
    split: str  # "train" | "test"

    def __post_init__(self):
        shapes = {r.pixels.shape for r in (self.layout, self.mask, self.contour)}
        pitches = {r.pitch for r in (self.layout, self.mask, self.contour)}
        if len(shapes) != 1 or len(pitches) != 1:
            raise InputError("layout/mask/contour must share shape and pitch")
        if self.split not in ("train", "test"):
            raise InputError(f"bad split {self.split!r}")

    def annotations_for(self, task: Task) -> list[HotspotAnnotation]:
        return [a for a in self.annotations if a.task == task]


@dataclass
class CorpusManifest:
    """Index of a built corpus: seed, condition grid, counts, records."""

    seed: int
    condition_grid: list[ProcessCondition]
    counts: dict
    records: list[dict]
    calibration_constant: float = 1.0

    def __post_init__(self):
        total = sum(self.counts.get(s, 0) for s in ("train", "test"))
        if total != len(self.records):
            raise InputError(
                f"record count {len(self.records)} != split counts {self.counts}"
            )


def condition_to_json(cond: ProcessCondition) -> dict:
    return {
        "source": cond.source_type.value,
        "threshold": cond.resist_threshold,
        "focus": cond.focus,
        "dose": cond.dose,
    }


def condition_from_json(obj: dict) -> ProcessCondition:
    return ProcessCondition(
        source_type=SourceType(obj["source"]),
        resist_threshold=obj["threshold"],
        focus=obj["focus"],
        dose=obj["dose"],
    )


def annotation_to_json(a: HotspotAnnotation) -> dict:
    return {"task": a.task.value, "class": a.klass.value, "bbox": list(a.bbox)}


def annotation_from_json(obj: dict) -> HotspotAnnotation:
    return HotspotAnnotation(
        task=Task(obj["task"]),
        klass=ViolationClass(obj["class"]),
        bbox=tuple(obj["bbox"]),
    )


def class_index(task: Task, klass: ViolationClass) -> int:
    """Stable per-task class index used by the detector heads."""
    try:
        return TASK_CLASSES[task].index(klass)
    except ValueError:
        raise InputError(f"{klass} is not a {task} class") from None


def class_from_index(task: Task, idx: int) -> ViolationClass:
    return TASK_CLASSES[task][idx]
