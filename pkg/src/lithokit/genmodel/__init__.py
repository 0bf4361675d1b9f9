"""Process-conditioned mask and contour generator."""

from .condition import ConditionEncoder, ScalarChannel
from .config import GeneratorConfig
from .decoder import RasterDecoder, ResidualBlock
from .fusion import CrossAttentionFusion, scaled_dot_attention
from .generator import BINARIZE_THRESHOLD, UnifiedGenerator, raster_to_tensor
from .swin import LayoutEncoder, PatchMerging, WindowBlock, window_merge, window_partition
from .types import FusedFeatures, GenerationOutput, LayoutEmbedding, ProcessEmbedding

__all__ = [
    "BINARIZE_THRESHOLD",
    "ConditionEncoder",
    "CrossAttentionFusion",
    "FusedFeatures",
    "GenerationOutput",
    "GeneratorConfig",
    "LayoutEmbedding",
    "LayoutEncoder",
    "PatchMerging",
    "ProcessEmbedding",
    "RasterDecoder",
    "ResidualBlock",
    "ScalarChannel",
    "UnifiedGenerator",
    "WindowBlock",
    "raster_to_tensor",
    "scaled_dot_attention",
    "window_merge",
    "window_partition",
]
