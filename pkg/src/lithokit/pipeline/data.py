"""Corpus-to-tensor plumbing and deterministic batch scheduling.

Batch composition is a pure function of (seed, step): each step seeds a
fresh PCG64 stream from a hash of both, so a resumed run reproduces the
exact batch sequence of an uninterrupted one without carrying sampler
state in checkpoints.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..corpus.build import load_sample, read_manifest
from ..corpus.types import (
    HotspotAnnotation,
    ProcessCondition,
    Sample,
    Task,
    class_index,
    condition_to_json,
)
from ..errors import ConfigurationError, InputError


def _stream(seed: int, step: int, tag: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{step}:{tag}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))


@dataclass
class LoadedCorpus:
    """All samples of one split, decoded and kept in memory (desk scale)."""

    corpus_dir: str
    split: str
    samples: List[Sample]
    condition_grid: List[ProcessCondition]
    raster_size: int


def load_split(corpus_dir, split: str) -> LoadedCorpus:
    manifest = read_manifest(corpus_dir)
    records = [r for r in manifest.records if r["split"] == split]
    if not records:
        raise InputError(f"corpus {corpus_dir} has no '{split}' samples")
    samples = [load_sample(corpus_dir, r) for r in records]
    size = samples[0].layout.pixels.shape[0]
    return LoadedCorpus(
        corpus_dir=str(corpus_dir),
        split=split,
        samples=samples,
        condition_grid=manifest.condition_grid,
        raster_size=size,
    )


def batch_indices(seed: int, step: int, n: int, batch_size: int) -> np.ndarray:
    rng = _stream(seed, step, "batch")
    k = min(batch_size, n)
    return rng.choice(n, size=k, replace=False)


def orientation_codes(seed: int, step: int, batch: int, rate: float) -> np.ndarray:
    """Per-slot dihedral-group elements (0..7) for this step's batch.

    Each slot keeps its canonical orientation (code 0) with probability
    ``1 - rate``; otherwise it draws uniformly over the eight axis-aligned
    symmetries. Drawn from its own hashed stream so resumed runs replay the
    same orientations.
    """
    if rate <= 0.0:
        return np.zeros(batch, dtype=np.int64)
    rng = _stream(seed, step, "orient")
    codes = rng.integers(0, 8, size=batch)
    return np.where(rng.random(batch) < rate, codes, 0)


def apply_orientation(t: torch.Tensor, code: int) -> torch.Tensor:
    """Rotate/flip the last two dims by dihedral element ``code`` (0..7)."""
    out = torch.rot90(t, k=int(code) % 4, dims=(-2, -1))
    if code >= 4:
        out = torch.flip(out, dims=(-1,))
    return out.contiguous()


def orient_batch(batch: torch.Tensor, codes: np.ndarray) -> torch.Tensor:
    if not codes.any():
        return batch
    return torch.stack([apply_orientation(batch[i], c) for i, c in enumerate(codes)])


def partner_condition(seed: int, step: int, slot: int,
                      grid: Sequence[ProcessCondition],
                      own: ProcessCondition) -> ProcessCondition:
    """A grid condition different from ``own`` for the contrastive twin."""
    if len(grid) < 2:
        raise ConfigurationError("contrastive pairing needs >= 2 grid conditions")
    rng = _stream(seed, step, f"partner:{slot}")
    own_json = condition_to_json(own)
    idx = int(rng.integers(len(grid)))
    for _ in range(len(grid)):
        if condition_to_json(grid[idx]) != own_json:
            return grid[idx]
        idx = (idx + 1) % len(grid)
    raise ConfigurationError("condition grid collapses to a single condition")


def raster_batch(rasters: Sequence) -> torch.Tensor:
    """Stack binary rasters into (B, H, W) float32."""
    return torch.stack([
        torch.as_tensor(np.asarray(r.pixels if hasattr(r, "pixels") else r),
                        dtype=torch.float32)
        for r in rasters
    ])


def condition_batch(conds: Sequence[ProcessCondition]):
    """-> (source (B,1,h,w), threshold (B,), focus (B,), dose (B,))."""
    source = torch.stack([
        torch.as_tensor(c.source_raster, dtype=torch.float32)[None] for c in conds
    ])
    thr = torch.tensor([float(c.resist_threshold) for c in conds])
    focus = torch.tensor([float(c.focus) for c in conds])
    dose = torch.tensor([float(c.dose) for c in conds])
    return source, thr, focus, dose


def annotation_targets(annotations: Sequence[HotspotAnnotation], task: Task,
                       raster_size: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """Task-filtered labels and normalized cxcywh boxes for one sample."""
    rows = [a for a in annotations if a.task is task]
    labels = torch.tensor([class_index(task, a.klass) for a in rows], dtype=torch.long)
    if rows:
        xyxy = torch.tensor([a.bbox for a in rows], dtype=torch.float32) / raster_size
        boxes = torch.stack([
            (xyxy[:, 0] + xyxy[:, 2]) / 2,
            (xyxy[:, 1] + xyxy[:, 3]) / 2,
            xyxy[:, 2] - xyxy[:, 0],
            xyxy[:, 3] - xyxy[:, 1],
        ], dim=1)
    else:
        boxes = torch.zeros((0, 4), dtype=torch.float32)
    return labels, boxes


def detector_inputs(task: Task, sample: Sample):
    """(primary, secondary) rasters per the task's input contract."""
    if task is Task.DRC:
        return sample.layout, None
    if task is Task.MRC:
        return sample.mask, None
    return sample.contour, sample.layout


def check_query_budget(corpus: LoadedCorpus, task: Task, queries: int) -> None:
    worst = max(
        (sum(1 for a in s.annotations if a.task is task) for s in corpus.samples),
        default=0,
    )
    if worst > queries:
        raise ConfigurationError(
            f"{task.value} sample carries {worst} boxes but the detector has "
            f"{queries} queries; raise the query count")
