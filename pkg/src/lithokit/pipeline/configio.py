"""Run configuration dataclass + YAML (de)serialization."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..corpus.build import CorpusConfig
from ..corpus.layout import LayoutConfig
from ..corpus.types import RuleSet, Task
from ..errors import ConfigurationError

PHASES = ("gen_pretrain", "det_pretrain", "joint_finetune")


@dataclass
class RunConfig:
    phase: str
    corpus: str
    out_dir: str
    steps: int = 2000
    batch_size: int = 4
    seed: int = 0
    lr: float = 2e-4
    optimizer: str = "adam"
    schedule: str = "cosine"  # "cosine" | "constant"
    grad_clip: float = 1.0
    # generator phase: fraction of batch slots given a random flip/rotation
    augment: float = 0.5
    checkpoint_every: int = 1000
    log_every: int = 25
    task: Optional[str] = None  # det phases: drc | mrc | lrc
    model: dict = field(default_factory=dict)
    loss: dict = field(default_factory=dict)
    generator_ckpt: Optional[str] = None
    detector_ckpt: Optional[str] = None
    resume_from: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.phase not in PHASES:
            raise ConfigurationError(f"unknown phase {self.phase!r}; expected {PHASES}")
        if self.optimizer != "adam":
            raise ConfigurationError(f"unsupported optimizer {self.optimizer!r}")
        if self.schedule not in ("cosine", "constant"):
            raise ConfigurationError(f"unsupported schedule {self.schedule!r}")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigurationError("steps and batch_size must be positive")
        if not 0.0 <= self.augment <= 1.0:
            raise ConfigurationError(f"augment must be in [0, 1], got {self.augment}")
        if self.phase == "det_pretrain":
            if self.task is None:
                raise ConfigurationError("det_pretrain requires a task")
            Task(self.task)
        if self.phase == "joint_finetune":
            if not (self.generator_ckpt and self.detector_ckpt):
                raise ConfigurationError(
                    "joint_finetune requires generator_ckpt and detector_ckpt")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def load_run_config(path) -> RunConfig:
    with open(path) as fh:
        obj = yaml.safe_load(fh) or {}
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{path} does not contain a mapping")
    try:
        cfg = RunConfig(**obj)
    except TypeError as exc:
        raise ConfigurationError(f"bad run config {path}: {exc}") from None
    return cfg.validate()


def save_run_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))


def corpus_config_from_yaml(path, out_dir) -> CorpusConfig:
    """Parse a corpus-generation YAML; ``out_dir`` comes from the CLI."""
    with open(path) as fh:
        obj = yaml.safe_load(fh) or {}
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{path} does not contain a mapping")
    obj.pop("out_dir", None)
    kwargs = {}
    for key, value in obj.items():
        if key == "layout":
            value = LayoutConfig(**{
                k: tuple(v) if isinstance(v, list) else v for k, v in value.items()})
        elif key.endswith("_rules"):
            value = RuleSet(**value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return CorpusConfig(out_dir=str(out_dir), **kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad corpus config {path}: {exc}") from None
