from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Tuple

from ..corpus.types import TASK_CLASSES, Task
from ..errors import ConfigurationError


@dataclass
class DetectorConfig:
    """Desk-scale detector hyperparameters.

    ``task`` fixes the input arity (LRC runs the dual-branch stem) and
    the class vocabulary.  ``unified`` enables the generator-feature
    injection path used by the joint pipeline.
    """

    task: Task = Task.DRC
    queries: int = 30
    decoder_layers: int = 3
    width: int = 128
    backbone_channels: Tuple[int, int, int] = (32, 64, 128)
    heads: int = 8
    unified: bool = False
    generator_dim: int = 192  # token width of the injected fused features

    @property
    def num_classes(self) -> int:
        return len(TASK_CLASSES[self.task])

    @property
    def dual_branch(self) -> bool:
        return self.task is Task.LRC

    def validate(self) -> "DetectorConfig":
        if self.width % self.heads != 0:
            raise ConfigurationError(
                f"width {self.width} not divisible by {self.heads} heads")
        if self.queries < 1:
            raise ConfigurationError("need at least one query")
        if self.decoder_layers < 1:
            raise ConfigurationError("need at least one decoder layer")
        if self.unified and self.task is not Task.LRC:
            raise ConfigurationError("generator injection only applies to LRC")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.value
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "DetectorConfig":
        obj = dict(obj)
        obj["task"] = Task(obj["task"])
        if isinstance(obj.get("backbone_channels"), list):
            obj["backbone_channels"] = tuple(obj["backbone_channels"])
        return cls(**obj).validate()
