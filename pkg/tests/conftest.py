"""Shared fixtures: a tiny on-disk corpus reused across module tests."""

import numpy as np
import pytest

from lithokit.corpus import (
    BinaryRaster,
    CorpusConfig,
    LayoutConfig,
    ProcessCondition,
    SourceType,
    build_corpus,
)


def raster(arr, pitch=4.0) -> BinaryRaster:
    return BinaryRaster(np.asarray(arr, dtype=np.uint8), pitch=pitch)


def zeros(h, w=None) -> BinaryRaster:
    return raster(np.zeros((h, w or h), dtype=np.uint8))


def nominal_condition(
    source=SourceType.CIRCULAR, threshold=0.37, focus=0.0, dose=1.0
) -> ProcessCondition:
    return ProcessCondition(
        source_type=source, resist_threshold=threshold, focus=focus, dose=dose
    )


TINY_CORPUS_CONFIG = dict(
    n_samples=10,
    train_ratio=0.8,
    seed=5,
    layout=LayoutConfig(size=64, wire_width=(6, 12), wire_length=(12, 32)),
    sources=("circular", "annular"),
    thresholds=(0.0923125,),
    foci=(0.0, 50.0),
    doses=(1.0, 1.2),
    opc_iterations=4,
)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small 64 px corpus shared by corpus/pipeline tests (10 samples)."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    manifest = build_corpus(CorpusConfig(out_dir=str(out), **TINY_CORPUS_CONFIG))
    return out, manifest
