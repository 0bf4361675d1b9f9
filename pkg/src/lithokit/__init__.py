"""lithokit: process-conditioned lithography generation and hotspot detection.

Subpackages:
    corpus      synthetic layout/mask/contour corpus with rule-check labels
    genmodel    conditional mask+contour generator
    detmodel    query-based hotspot detector
    objectives  training losses
    evalmetrics evaluation metrics
    pipeline    training/eval orchestration and CLI
"""

__version__ = "0.1.0"
