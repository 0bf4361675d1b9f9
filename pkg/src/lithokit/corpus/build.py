"""Corpus builder: seeded layout→mask→contour triplets plus rule labels.

Every artifact is a pure function of (global seed, sample index, config):
layout generation, condition choice and the train/test split are all keyed
by SHA-256 of "seed:index[:tag]", so regeneration — in any order — yields
byte-identical trees. Rasters land as 0/255 single-channel PNGs under
train/ and test/, with one JSON line per sample in manifest.jsonl and the
build parameters (including the threshold calibration constant) in
meta.json.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .layout import LayoutConfig, generate_layout
from .litho import run_opc, simulate_contour
from .rules import check_drc, check_lrc, check_mrc
from .types import (
    BinaryRaster,
    CorpusManifest,
    ProcessCondition,
    RuleSet,
    Sample,
    SourceType,
    annotation_from_json,
    annotation_to_json,
    condition_from_json,
    condition_to_json,
)

# Nominal resist thresholds before calibration to the kernel-sum-1 optical
# model; the calibration multiplier is recorded in meta.json.
NOMINAL_THRESHOLDS = (0.0923125, 0.1436665)
DEFAULT_CALIBRATION = 4.0


def default_drc_rules() -> RuleSet:
    return RuleSet(min_width=6, min_spacing=6, min_area=30)


def default_mrc_rules() -> RuleSet:
    # Tighter than the design rules: correction serifs are legal down to
    # 3 px, anything thinner is an unmanufacturable mask feature.
    return RuleSet(min_width=3, min_spacing=3, min_area=10)


def default_lrc_rules() -> RuleSet:
    return RuleSet(pinch_width=4, bridge_gap=6, epe_tolerance=3)


@dataclass
class CorpusConfig:
    out_dir: str
    n_samples: int = 64
    train_ratio: float = 0.85
    seed: int = 0
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    sources: tuple = ("annular", "circular", "bullseye")
    thresholds: tuple = NOMINAL_THRESHOLDS
    foci: tuple = (0.0, 50.0)
    doses: tuple = (1.0, 1.2)
    calibration: float = DEFAULT_CALIBRATION
    opc_iterations: int = 10
    drc_rules: RuleSet = field(default_factory=default_drc_rules)
    mrc_rules: RuleSet = field(default_factory=default_mrc_rules)
    lrc_rules: RuleSet = field(default_factory=default_lrc_rules)

    def condition_grid(self) -> list[ProcessCondition]:
        """Cartesian product of the four process axes, in declaration order."""
        grid = []
        for s in self.sources:
            for t in self.thresholds:
                for f in self.foci:
                    for d in self.doses:
                        grid.append(
                            ProcessCondition(
                                source_type=SourceType(s),
                                resist_threshold=self.calibration * t,
                                focus=f,
                                dose=d,
                            )
                        )
        return grid


def _digest(*parts) -> bytes:
    return hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()


def sample_seed(global_seed: int, index: int) -> int:
    """64-bit per-sample seed; independent of worker order."""
    return int.from_bytes(_digest(global_seed, index)[:8], "big")


def split_assignment(global_seed: int, n: int, train_ratio: float) -> list[str]:
    """Deterministic split with an exact train quota (hash-ranked)."""
    n_train = round(train_ratio * n)
    ranked = sorted(range(n), key=lambda i: _digest(global_seed, i, "split"))
    train = set(ranked[:n_train])
    return ["train" if i in train else "test" for i in range(n)]


def _write_png(path: Path, raster: BinaryRaster):
    img = Image.fromarray((raster.pixels * 255).astype(np.uint8), mode="L")
    img.save(path, format="PNG")


def _read_png(path: Path, pitch: float) -> BinaryRaster:
    arr = np.asarray(Image.open(path).convert("L"))
    return BinaryRaster((arr > 127).astype(np.uint8), pitch=pitch)


def build_corpus(cfg: CorpusConfig) -> CorpusManifest:
    out = Path(cfg.out_dir)
    try:
        for sub in ("train", "test"):
            (out / sub).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create corpus directory {out}: {e}") from e

    grid = cfg.condition_grid()
    splits = split_assignment(cfg.seed, cfg.n_samples, cfg.train_ratio)
    records = []
    counts = {"train": 0, "test": 0}

    for i in range(cfg.n_samples):
        seed_i = sample_seed(cfg.seed, i)
        gen = generate_layout(seed_i, cfg.layout)
        cond_idx = int.from_bytes(_digest(cfg.seed, i, "cond")[:8], "big") % len(grid)
        cond = grid[cond_idx]
        mask = run_opc(gen.raster, cond, cfg.opc_iterations)
        contour = simulate_contour(mask, cond)

        anns = []
        anns += check_drc(gen.raster, cfg.drc_rules)
        anns += check_mrc(mask, cfg.mrc_rules)
        anns += check_lrc(contour, gen.raster, cfg.lrc_rules)

        sid = f"s{i:05d}"
        split = splits[i]
        counts[split] += 1
        for tag, raster in (("layout", gen.raster), ("mask", mask), ("contour", contour)):
            _write_png(out / split / f"{sid}_{tag}.png", raster)
        records.append(
            {
                "id": sid,
                "condition": condition_to_json(cond),
                "annotations": [annotation_to_json(a) for a in anns],
                "split": split,
            }
        )

    with open(out / "manifest.jsonl", "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")

    meta = {
        "seed": cfg.seed,
        "n_samples": cfg.n_samples,
        "train_ratio": cfg.train_ratio,
        "calibration_constant": cfg.calibration,
        "condition_grid": [condition_to_json(c) for c in grid],
        "rules": {
            "drc": asdict(cfg.drc_rules),
            "mrc": asdict(cfg.mrc_rules),
            "lrc": asdict(cfg.lrc_rules),
        },
        "layout": asdict(cfg.layout),
    }
    with open(out / "meta.json", "w") as f:
        json.dump(meta, f, sort_keys=True, indent=2)
        f.write("\n")

    return CorpusManifest(
        seed=cfg.seed,
        condition_grid=grid,
        counts=counts,
        records=records,
        calibration_constant=cfg.calibration,
    )


def read_manifest(corpus_dir) -> CorpusManifest:
    """Load manifest.jsonl + meta.json and verify referenced files exist."""
    out = Path(corpus_dir)
    meta_path = out / "meta.json"
    manifest_path = out / "manifest.jsonl"
    if not meta_path.exists() or not manifest_path.exists():
        raise OSError(f"{out} does not contain a corpus (missing manifest/meta)")
    with open(meta_path) as f:
        meta = json.load(f)
    records = []
    counts = {"train": 0, "test": 0}
    with open(manifest_path) as f:
        for line in f:
            rec = json.loads(line)
            records.append(rec)
            counts[rec["split"]] += 1
            for tag in ("layout", "mask", "contour"):
                p = out / rec["split"] / f"{rec['id']}_{tag}.png"
                if not p.exists():
                    raise OSError(f"manifest references missing file {p}")
    grid = [condition_from_json(c) for c in meta["condition_grid"]]
    return CorpusManifest(
        seed=meta["seed"],
        condition_grid=grid,
        counts=counts,
        records=records,
        calibration_constant=meta["calibration_constant"],
    )


def load_sample(corpus_dir, record: dict, pitch: float = 4.0) -> Sample:
    """Materialize one manifest record into an in-memory Sample."""
    out = Path(corpus_dir)
    sid, split = record["id"], record["split"]
    rasters = {
        tag: _read_png(out / split / f"{sid}_{tag}.png", pitch)
        for tag in ("layout", "mask", "contour")
    }
    return Sample(
        id=sid,
        layout=rasters["layout"],
        mask=rasters["mask"],
        contour=rasters["contour"],
        condition=condition_from_json(record["condition"]),
        annotations=[annotation_from_json(a) for a in record["annotations"]],
        split=split,
    )


def corpus_fingerprint(corpus_dir) -> str:
    """SHA-256 over every corpus file, keyed by relative path."""
    out = Path(corpus_dir)
    h = hashlib.sha256()
    for p in sorted(out.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(out)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()
