"""Query-based hotspot detector with multi-scale fusion."""

from .backbone import Backbone, ResidualDown
from .config import DetectorConfig
from .decoder import DecoderLayer, QueryDecoder
from .detector import NO_HOTSPOT_BOUNDARY, HotspotDetector
from .encoder import GeneratorInjection, GlobalEncoder, PyramidFusion
from .types import Detection, PyramidFeatures, QuerySet

__all__ = [
    "Backbone",
    "DecoderLayer",
    "Detection",
    "DetectorConfig",
    "GeneratorInjection",
    "GlobalEncoder",
    "HotspotDetector",
    "NO_HOTSPOT_BOUNDARY",
    "PyramidFeatures",
    "PyramidFusion",
    "QueryDecoder",
    "QuerySet",
    "ResidualDown",
]
