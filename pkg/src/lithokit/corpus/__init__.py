"""Synthetic lithography corpus: layouts, masks, contours, hotspot labels."""

from .build import (
    DEFAULT_CALIBRATION,
    NOMINAL_THRESHOLDS,
    CorpusConfig,
    build_corpus,
    corpus_fingerprint,
    default_drc_rules,
    default_lrc_rules,
    default_mrc_rules,
    load_sample,
    read_manifest,
    sample_seed,
    split_assignment,
)
from .layout import GeneratedLayout, LayoutConfig, generate_layout
from .litho import (
    aerial_image,
    contour_error,
    run_opc,
    simulate_contour,
    simulator_call_count,
)
from .rules import check_drc, check_lrc, check_mrc
from .sources import (
    default_kernel_size,
    effective_sigma,
    kernel_second_moment,
    render_source_raster,
    source_kernel,
)
from .types import (
    TASK_CLASSES,
    BinaryRaster,
    CorpusManifest,
    HotspotAnnotation,
    ProcessCondition,
    RuleSet,
    Sample,
    SourceType,
    Task,
    ViolationClass,
    annotation_from_json,
    annotation_to_json,
    class_from_index,
    class_index,
    condition_from_json,
    condition_to_json,
)

__all__ = [
    "BinaryRaster",
    "CorpusConfig",
    "CorpusManifest",
    "GeneratedLayout",
    "HotspotAnnotation",
    "LayoutConfig",
    "ProcessCondition",
    "RuleSet",
    "Sample",
    "SourceType",
    "Task",
    "TASK_CLASSES",
    "ViolationClass",
    "DEFAULT_CALIBRATION",
    "NOMINAL_THRESHOLDS",
    "aerial_image",
    "annotation_from_json",
    "annotation_to_json",
    "build_corpus",
    "check_drc",
    "check_lrc",
    "check_mrc",
    "class_from_index",
    "class_index",
    "condition_from_json",
    "condition_to_json",
    "contour_error",
    "corpus_fingerprint",
    "default_drc_rules",
    "default_kernel_size",
    "default_lrc_rules",
    "default_mrc_rules",
    "effective_sigma",
    "generate_layout",
    "kernel_second_moment",
    "load_sample",
    "read_manifest",
    "render_source_raster",
    "run_opc",
    "sample_seed",
    "simulate_contour",
    "simulator_call_count",
    "source_kernel",
    "split_assignment",
]
