"""Three-phase training orchestration.

Phase 1 pretrains the generator on (layout, condition) → (mask, contour)
triplets with the contrastive terms assembled per batch; phase 2
pretrains a detector per task on oracle inputs; phase 3 freezes the
generator and fine-tunes the LRC detector on generated contours with
fused-feature injection.  All phases share the deterministic batch
schedule from :mod:`.data`, an adaptive-moment optimizer with cosine (or
constant) learning rate, gradient-norm clipping, JSONL loss curves, and
periodic byte-stable checkpoints that carry optimizer and RNG state so a
resumed run retraces the uninterrupted trajectory exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import torch

from ..corpus.types import Task
from ..detmodel import DetectorConfig, HotspotDetector
from ..errors import ConfigurationError, NumericError
from ..genmodel import GeneratorConfig, UnifiedGenerator
from ..objectives import (
    DetLossWeights,
    GenerationBatch,
    GenLossWeights,
    combine_generation_terms,
    detection_loss_terms,
    generation_loss_terms,
)
from .checkpoint import (
    load_checkpoint,
    pack_optimizer,
    save_checkpoint,
    unpack_optimizer,
    weights_hash,
)
from .configio import RunConfig
from .data import (
    LoadedCorpus,
    annotation_targets,
    batch_indices,
    check_query_budget,
    condition_batch,
    detector_inputs,
    load_split,
    orient_batch,
    orientation_codes,
    partner_condition,
    raster_batch,
)

StopCheck = Optional[Callable[[int, torch.nn.Module, list], bool]]


def _lr_at(cfg: RunConfig, step: int) -> float:
    if cfg.schedule == "constant":
        return cfg.lr
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * step / max(cfg.steps, 1)))


def _set_lr(opt: torch.optim.Optimizer, lr: float) -> None:
    for group in opt.param_groups:
        group["lr"] = lr


def _model_tensors(model: torch.nn.Module, prefix: str = "model") -> dict:
    return {f"{prefix}.{k}": v for k, v in model.state_dict().items()}


def _strip(tensors: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in tensors.items() if k.startswith(prefix + ".")}


def _save_phase_checkpoint(path, kind: str, cfg: RunConfig, config: dict,
                           model_tensors: dict, opt: torch.optim.Optimizer,
                           step: int, extra: Optional[dict] = None) -> None:
    tensors = dict(model_tensors)
    opt_tensors, opt_meta = pack_optimizer(opt)
    tensors.update(opt_tensors)
    tensors["rng.torch"] = torch.get_rng_state()
    meta = {
        "step": step,
        "phase": cfg.phase,
        "optimizer_meta": opt_meta,
    }
    meta.update(extra or {})
    save_checkpoint(path, kind, config, tensors, meta)


def _resume(path, model: torch.nn.Module, opt: torch.optim.Optimizer,
            prefix: str = "model") -> int:
    ckpt = load_checkpoint(path)
    model.load_state_dict(_strip(ckpt.tensors, prefix))
    unpack_optimizer(opt, ckpt.tensors, ckpt.extra["optimizer_meta"])
    torch.set_rng_state(ckpt.tensors["rng.torch"].to(torch.uint8))
    return int(ckpt.extra["step"])


class _RunLog:
    def __init__(self, out_dir: Path, resuming: bool):
        self.path = out_dir / "metrics.jsonl"
        self.history: list = []
        if not resuming and self.path.exists():
            self.path.unlink()

    def append(self, record: dict) -> None:
        self.history.append(record)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _require_finite(total: torch.Tensor, step: int, terms: dict) -> None:
    if not torch.isfinite(total):
        detail = {k: float(v.detach()) for k, v in terms.items()}
        raise NumericError(f"non-finite loss at step {step}: {detail}")


def _generator_model(cfg: RunConfig, corpus: LoadedCorpus):
    model_kwargs = {"raster_size": corpus.raster_size, **cfg.model}
    gcfg = GeneratorConfig(**{
        k: tuple(v) if isinstance(v, list) else v for k, v in model_kwargs.items()
    }).validate()
    if gcfg.raster_size != corpus.raster_size:
        raise ConfigurationError(
            f"model raster {gcfg.raster_size} != corpus raster {corpus.raster_size}")
    return gcfg


def pretrain_generator(cfg: RunConfig, stop_check: StopCheck = None) -> Path:
    """Phase 1: optimize the unified generation loss on the train split."""
    cfg.validate()
    if cfg.phase != "gen_pretrain":
        raise ConfigurationError(f"pretrain_generator got phase {cfg.phase!r}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_split(cfg.corpus, "train")
    gcfg = _generator_model(cfg, corpus)
    weights = _gen_weights(cfg)

    torch.manual_seed(cfg.seed)
    model = UnifiedGenerator(gcfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    start = _resume(cfg.resume_from, model, opt) if cfg.resume_from else 0
    log = _RunLog(out, resuming=start > 0)

    config_echo = {"model": gcfg.to_dict(), "loss": _weights_dict(weights),
                   "run": cfg.to_dict()}
    # Contrastive terms need the second forward pass per layout; skip the
    # extra work when both terms are off.
    contrastive = weights.w_con > 0 and not (weights.disable_sac and weights.disable_pac)
    n = len(corpus.samples)

    final = out / "generator.lkck"
    for step in range(start, cfg.steps):
        _set_lr(opt, _lr_at(cfg, step))
        idx = batch_indices(cfg.seed, step, n, cfg.batch_size)
        samples = [corpus.samples[i] for i in idx]
        b = len(samples)

        layouts = raster_batch([s.layout for s in samples])
        mask_target = raster_batch([s.mask for s in samples])
        contour_target = raster_batch([s.contour for s in samples])
        # The litho kernel is symmetric under flips and transposition, so a
        # consistently reoriented (layout, mask, contour) triplet is another
        # valid draw from the same corpus distribution.
        codes = orientation_codes(cfg.seed, step, b, cfg.augment)
        layouts = orient_batch(layouts, codes)
        mask_target = orient_batch(mask_target, codes)
        contour_target = orient_batch(contour_target, codes)
        conds = [s.condition for s in samples]
        if contrastive:
            partners = [
                partner_condition(cfg.seed, step, slot, corpus.condition_grid, s.condition)
                for slot, s in enumerate(samples)
            ]
            layout_in = torch.cat([layouts, layouts])[:, None]
            cond_in = conds + partners
        else:
            layout_in = layouts[:, None]
            cond_in = conds
        source, thr, focus, dose = condition_batch(cond_in)
        mask_prob, contour_prob, _ = model.forward_batch(layout_in, source, thr, focus, dose)

        sac_anchors, sac_positives, sac_negatives, pac_pairs = [], [], [], []
        if contrastive:
            for i in range(b):
                pac_pairs.append((contour_prob[b + i], contour_target[i]))
            if b >= 2:
                for i in range(b):
                    sac_anchors.append(contour_prob[i])
                    sac_positives.append(contour_prob[b + i])
                    sac_negatives.append(
                        [contour_prob[j] for j in range(2 * b) if j % b != i])

        batch = GenerationBatch(
            mask_prob=mask_prob[:b],
            contour_prob=contour_prob[:b],
            mask_target=mask_target,
            contour_target=contour_target,
            sac_anchors=sac_anchors,
            sac_positives=sac_positives,
            sac_negatives=sac_negatives,
            pac_pairs=pac_pairs,
        )
        terms = generation_loss_terms(batch, weights)
        total = combine_generation_terms(terms, weights)
        _require_finite(total, step, terms)

        opt.zero_grad()
        total.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        opt.step()

        log.append({"step": step, "lr": _lr_at(cfg, step),
                    "total": float(total.detach()),
                    **{k: float(v.detach()) for k, v in terms.items()}})
        done = step + 1
        if done % cfg.checkpoint_every == 0 and done < cfg.steps:
            _save_phase_checkpoint(out / f"ckpt_{done:06d}.lkck", "generator", cfg,
                                   config_echo, _model_tensors(model), opt, done)
        if stop_check is not None and stop_check(step, model, log.history):
            break

    last = log.history[-1]["step"] + 1 if log.history else start
    _save_phase_checkpoint(final, "generator", cfg, config_echo,
                           _model_tensors(model), opt, last)
    return final


def _gen_weights(cfg: RunConfig) -> GenLossWeights:
    try:
        return GenLossWeights(**cfg.loss)
    except TypeError as exc:
        raise ConfigurationError(f"bad generation loss config: {exc}") from None


def _det_weights(cfg: RunConfig) -> DetLossWeights:
    try:
        return DetLossWeights(**cfg.loss)
    except TypeError as exc:
        raise ConfigurationError(f"bad detection loss config: {exc}") from None


def _weights_dict(weights) -> dict:
    from dataclasses import asdict

    return asdict(weights)


def _detection_step(probs, boxes, targets, weights):
    """Mean loss + mean logged terms over one batch of images."""
    w = weights
    totals = []
    sums: dict = {}
    for i, (labels, gt_boxes) in enumerate(targets):
        terms = detection_loss_terms(probs[i], boxes[i], labels, gt_boxes, w)
        totals.append(w.w_vfl * terms["vfl"] + w.w_fppl * terms["fppl"]
                      + w.w_bbox * terms["bbox"] + w.w_giou * terms["giou"])
        for key, value in terms.items():
            sums[key] = sums.get(key, 0.0) + float(value.detach())
    total = torch.stack(totals).mean()
    mean_terms = {k: v / len(targets) for k, v in sums.items()}
    return total, mean_terms


def pretrain_detector(cfg: RunConfig, task=None, stop_check: StopCheck = None) -> Path:
    """Phase 2: per-task detector training on oracle inputs."""
    cfg.validate()
    if cfg.phase != "det_pretrain":
        raise ConfigurationError(f"pretrain_detector got phase {cfg.phase!r}")
    task = Task(task or cfg.task)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_split(cfg.corpus, "train")
    model_kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.model.items()}
    dcfg = DetectorConfig(task=task, **model_kwargs).validate()
    check_query_budget(corpus, task, dcfg.queries)
    weights = _det_weights(cfg)

    torch.manual_seed(cfg.seed)
    model = HotspotDetector(dcfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    start = _resume(cfg.resume_from, model, opt) if cfg.resume_from else 0
    log = _RunLog(out, resuming=start > 0)
    config_echo = {"model": dcfg.to_dict(), "loss": _weights_dict(weights),
                   "run": cfg.to_dict()}

    size = corpus.raster_size
    all_targets = [annotation_targets(s.annotations, task, size) for s in corpus.samples]
    n = len(corpus.samples)
    final = out / f"detector_{task.value}.lkck"

    for step in range(start, cfg.steps):
        _set_lr(opt, _lr_at(cfg, step))
        idx = batch_indices(cfg.seed, step, n, cfg.batch_size)
        samples = [corpus.samples[i] for i in idx]
        pairs = [detector_inputs(task, s) for s in samples]
        primary = raster_batch([p for p, _ in pairs])[:, None]
        secondary = None
        if pairs[0][1] is not None:
            secondary = raster_batch([s for _, s in pairs])[:, None]
        probs, boxes = model.forward_batch(primary, secondary)
        total, terms = _detection_step(probs, boxes, [all_targets[i] for i in idx], weights)
        _require_finite(total, step, terms)

        opt.zero_grad()
        total.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        opt.step()

        log.append({"step": step, "lr": _lr_at(cfg, step),
                    "total": float(total.detach()), **terms})
        done = step + 1
        if done % cfg.checkpoint_every == 0 and done < cfg.steps:
            _save_phase_checkpoint(out / f"ckpt_{done:06d}.lkck", "detector", cfg,
                                   config_echo, _model_tensors(model), opt, done)
        if stop_check is not None and stop_check(step, model, log.history):
            break

    last = log.history[-1]["step"] + 1 if log.history else start
    _save_phase_checkpoint(final, "detector", cfg, config_echo,
                           _model_tensors(model), opt, last)
    return final


def load_generator(ckpt_path) -> UnifiedGenerator:
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.kind not in ("generator", "joint"):
        raise ConfigurationError(f"{ckpt_path} holds a {ckpt.kind} checkpoint, "
                                 "expected a generator")
    key = "model" if ckpt.kind == "generator" else "generator"
    gcfg = GeneratorConfig.from_dict(ckpt.config[key])
    model = UnifiedGenerator(gcfg)
    model.load_state_dict(_strip(ckpt.tensors, key))
    model.eval()
    return model


def load_detector(ckpt_path) -> HotspotDetector:
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.kind not in ("detector", "joint"):
        raise ConfigurationError(f"{ckpt_path} holds a {ckpt.kind} checkpoint, "
                                 "expected a detector")
    key = "model" if ckpt.kind == "detector" else "detector"
    dcfg = DetectorConfig.from_dict(ckpt.config[key])
    model = HotspotDetector(dcfg)
    model.load_state_dict(_strip(ckpt.tensors, key))
    model.eval()
    return model


def joint_finetune(cfg: RunConfig, stop_check: StopCheck = None) -> Path:
    """Phase 3: frozen generator, LRC detector trained on generated contours."""
    cfg.validate()
    if cfg.phase != "joint_finetune":
        raise ConfigurationError(f"joint_finetune got phase {cfg.phase!r}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    gen_ckpt = load_checkpoint(cfg.generator_ckpt)
    if gen_ckpt.kind != "generator":
        raise ConfigurationError("generator_ckpt does not hold a generator")
    det_ckpt = load_checkpoint(cfg.detector_ckpt)
    if det_ckpt.kind != "detector":
        raise ConfigurationError("detector_ckpt does not hold a detector")
    base_dcfg = DetectorConfig.from_dict(det_ckpt.config["model"])
    if base_dcfg.task is not Task.LRC:
        raise ConfigurationError(
            f"joint fine-tuning needs an LRC detector, got {base_dcfg.task.value}")

    corpus = load_split(cfg.corpus, "train")
    gcfg = GeneratorConfig.from_dict(gen_ckpt.config["model"])
    if gcfg.raster_size != corpus.raster_size:
        raise ConfigurationError("generator checkpoint raster differs from corpus")

    torch.manual_seed(cfg.seed)
    generator = UnifiedGenerator(gcfg)
    generator.load_state_dict(_strip(gen_ckpt.tensors, "model"))
    generator.eval()
    for p in generator.parameters():
        p.requires_grad_(False)
    gen_hash_before = weights_hash(generator.state_dict())

    dcfg = replace(base_dcfg, unified=True, generator_dim=gcfg.model_dim).validate()
    detector = HotspotDetector(dcfg)
    missing, unexpected = detector.load_state_dict(
        _strip(det_ckpt.tensors, "model"), strict=False)
    if unexpected:
        raise ConfigurationError(f"detector checkpoint has stray tensors: {unexpected}")
    if any(not k.startswith("injection.") for k in missing):
        raise ConfigurationError(f"detector checkpoint is missing tensors: {missing}")
    check_query_budget(corpus, Task.LRC, dcfg.queries)

    weights = _det_weights(cfg)
    opt = torch.optim.Adam(detector.parameters(), lr=cfg.lr)
    start = 0
    if cfg.resume_from:
        start = _resume(cfg.resume_from, detector, opt, prefix="detector")
    log = _RunLog(out, resuming=start > 0)
    config_echo = {
        "generator": gcfg.to_dict(),
        "detector": dcfg.to_dict(),
        "loss": _weights_dict(weights),
        "run": cfg.to_dict(),
    }

    size = corpus.raster_size
    all_targets = [annotation_targets(s.annotations, Task.LRC, size)
                   for s in corpus.samples]
    n = len(corpus.samples)

    def _save(path, step):
        tensors = _model_tensors(detector, "detector")
        tensors.update(_model_tensors(generator, "generator"))
        opt_tensors, opt_meta = pack_optimizer(opt)
        tensors.update(opt_tensors)
        tensors["rng.torch"] = torch.get_rng_state()
        save_checkpoint(path, "joint", config_echo, tensors, {
            "step": step,
            "phase": cfg.phase,
            "optimizer_meta": opt_meta,
            "generator_hash": gen_hash_before,
        })

    final = out / "joint.lkck"
    for step in range(start, cfg.steps):
        _set_lr(opt, _lr_at(cfg, step))
        idx = batch_indices(cfg.seed, step, n, cfg.batch_size)
        samples = [corpus.samples[i] for i in idx]
        layouts = raster_batch([s.layout for s in samples])[:, None]
        source, thr, focus, dose = condition_batch([s.condition for s in samples])
        with torch.no_grad():
            _, contour_prob, fused = generator.forward_batch(
                layouts, source, thr, focus, dose)
        contour_in = (contour_prob >= 0.5).to(torch.float32)[:, None]
        probs, boxes = detector.forward_batch(contour_in, layouts, fused.tokens)
        total, terms = _detection_step(probs, boxes, [all_targets[i] for i in idx], weights)
        _require_finite(total, step, terms)

        opt.zero_grad()
        total.backward()
        torch.nn.utils.clip_grad_norm_(detector.parameters(), cfg.grad_clip)
        opt.step()

        log.append({"step": step, "lr": _lr_at(cfg, step),
                    "total": float(total.detach()), **terms})
        done = step + 1
        if done % cfg.checkpoint_every == 0 and done < cfg.steps:
            _save(out / f"ckpt_{done:06d}.lkck", done)
        if stop_check is not None and stop_check(step, detector, log.history):
            break

    gen_hash_after = weights_hash(generator.state_dict())
    if gen_hash_after != gen_hash_before:
        raise NumericError("frozen generator weights drifted during fine-tuning")
    last = log.history[-1]["step"] + 1 if log.history else start
    _save(final, last)
    return final
