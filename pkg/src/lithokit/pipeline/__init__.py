"""Training, evaluation, checkpointing, and CLI orchestration."""

from .checkpoint import (
    CheckpointData,
    load_checkpoint,
    pack_optimizer,
    save_checkpoint,
    unpack_optimizer,
    weights_hash,
)
from .configio import PHASES, RunConfig, corpus_config_from_yaml, load_run_config, save_run_config
from .data import (
    LoadedCorpus,
    annotation_targets,
    batch_indices,
    check_query_budget,
    condition_batch,
    detector_inputs,
    load_split,
    partner_condition,
    raster_batch,
)
from .evaluate import (
    EVAL_TASKS,
    evaluate_run,
    predict_detection,
    predict_generation,
    predict_joint,
    render_overlay,
    render_report,
    write_csv,
    write_report,
)
from .train import (
    joint_finetune,
    load_detector,
    load_generator,
    pretrain_detector,
    pretrain_generator,
)

__all__ = [
    "CheckpointData",
    "EVAL_TASKS",
    "LoadedCorpus",
    "PHASES",
    "RunConfig",
    "annotation_targets",
    "batch_indices",
    "check_query_budget",
    "condition_batch",
    "corpus_config_from_yaml",
    "detector_inputs",
    "evaluate_run",
    "joint_finetune",
    "load_checkpoint",
    "load_detector",
    "load_generator",
    "load_run_config",
    "load_split",
    "pack_optimizer",
    "partner_condition",
    "predict_detection",
    "predict_generation",
    "predict_joint",
    "pretrain_detector",
    "pretrain_generator",
    "raster_batch",
    "render_overlay",
    "render_report",
    "save_checkpoint",
    "save_run_config",
    "unpack_optimizer",
    "weights_hash",
    "write_csv",
    "write_report",
]
