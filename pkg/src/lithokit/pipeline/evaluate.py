"""Metric reports, per-image CSVs, prediction dumps, and overlay renders.

``evaluate_run`` scores a checkpoint on one corpus split and returns a
plain-dict report whose aggregate numbers are, by construction, the same
calls a user would make against the metrics module directly.  The report
carries everything the standalone renderer needs (pixel boxes with match
outcomes), so overlays can be drawn later without rerunning the model.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch
from PIL import Image, ImageDraw

from ..corpus.build import corpus_fingerprint, load_sample, read_manifest
from ..corpus.types import Task, condition_from_json
from ..errors import ConfigurationError, InputError, UsageError
from ..evalmetrics import (
    detection_summary,
    edge_f1,
    match_flags,
    mean_iou,
    mean_pixel_accuracy,
    to_pixel_boxes,
)
from ..genmodel.types import FusedFeatures
from .checkpoint import load_checkpoint
from .data import condition_batch, detector_inputs, load_split, raster_batch
from .train import load_detector, load_generator

EVAL_TASKS = ("drc", "mrc", "lrc", "unified", "generation")

# Overlay palette: true-positive predictions, missed ground truth, false alarms.
_RED = (220, 50, 47)
_BLUE = (38, 99, 235)
_PURPLE = (170, 60, 200)
_SCALE = 4  # overlay upsampling factor


def _pixels(raster) -> np.ndarray:
    arr = raster.pixels if hasattr(raster, "pixels") else np.asarray(raster)
    return arr.astype(bool)


def _seg_block(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> dict:
    return {
        "mPA": mean_pixel_accuracy(preds, gts),
        "mIoU": mean_iou(preds, gts),
        "edge_f1": edge_f1(preds, gts),
    }


def _generator_outputs(gen, samples, chunk: int = 8):
    """Batched inference over samples; yields per-sample
    (mask_prob, contour_prob, FusedFeatures) on CPU."""
    gen.eval()
    for lo in range(0, len(samples), chunk):
        part = samples[lo:lo + chunk]
        layouts = raster_batch([s.layout for s in part])[:, None]
        source, thr, focus, dose = condition_batch([s.condition for s in part])
        with torch.no_grad():
            mask_prob, contour_prob, fused = gen.forward_batch(
                layouts, source, thr, focus, dose)
        for i in range(len(part)):
            yield (mask_prob[i], contour_prob[i],
                   FusedFeatures(tokens=fused.tokens[i],
                                 attention_maps=fused.attention_maps[i]))


def _gt_for_task(sample, task: Task) -> list:
    return [a for a in sample.annotations if a.task is task]


def _det_entry(box, matched: bool) -> dict:
    return {
        "class": str(box.klass.value if hasattr(box.klass, "value") else box.klass),
        "bbox_px": [float(v) for v in box.bbox],
        "confidence": float(box.confidence),
        "matched": bool(matched),
    }


def _image_detection_entry(dets, gts) -> dict:
    """Per-image detection record at the 0.6/0.5 operating point."""
    kept, det_m, gt_m = match_flags(dets, gts)
    tp = sum(det_m)
    return {
        "n_gt": len(gts),
        "tp": tp,
        "fp": len(kept) - tp,
        "fa": len(kept) - tp,
        "detections": [_det_entry(d, m) for d, m in zip(kept, det_m)],
        "ground_truth": [
            {"class": str(g.klass.value), "bbox_px": [float(v) for v in g.bbox],
             "matched": bool(m)}
            for g, m in zip(gts, gt_m)
        ],
    }


def evaluate_run(ckpt_path, corpus_dir, task: str, split: str = "test",
                 report_path=None, csv_path=None, render_dir=None) -> dict:
    """Score a checkpoint on one corpus split.

    task: "drc" | "mrc" | "lrc" — detector checkpoint on oracle inputs;
    "unified" — joint checkpoint, generator output feeding the detector;
    "generation" — generator checkpoint, raster fidelity only.
    Optionally writes the JSON report, a per-image CSV, and overlays.
    """
    task = str(task).lower()
    if task not in EVAL_TASKS:
        raise ConfigurationError(f"unknown eval task {task!r}; expected one of {EVAL_TASKS}")
    corpus = load_split(corpus_dir, split)
    ckpt = load_checkpoint(ckpt_path)

    report = {
        "task": task,
        "checkpoint": str(ckpt_path),
        "corpus": str(Path(corpus_dir)),
        "split": split,
        "corpus_hash": corpus_fingerprint(corpus_dir),
        "n_images": len(corpus.samples),
        "mPA": None, "mIoU": None, "edge_f1": None,
        "tp": None, "fp": None, "fa": None,
        "recall": None, "precision": None, "f1": None, "ap50": None,
        "config_echo": ckpt.config,
        "images": [],
    }

    if task == "generation":
        _eval_generation(ckpt_path, corpus, report)
    elif task == "unified":
        _eval_unified(ckpt_path, corpus, report)
    else:
        _eval_detector(ckpt_path, corpus, Task(task), report)

    if report_path is not None:
        write_report(report, report_path)
    if csv_path is not None:
        write_csv(report, csv_path)
    if render_dir is not None:
        render_report(report, render_dir)
    return report


def _eval_generation(ckpt_path, corpus, report: dict) -> None:
    gen = load_generator(ckpt_path)
    if gen.cfg.raster_size != corpus.raster_size:
        raise ConfigurationError("generator raster size differs from corpus")
    mask_preds, contour_preds, mask_gts, contour_gts = [], [], [], []
    for sample, (mask_prob, contour_prob, _) in zip(
            corpus.samples, _generator_outputs(gen, corpus.samples)):
        mp = (mask_prob.numpy() >= 0.5)
        cp = (contour_prob.numpy() >= 0.5)
        mg = _pixels(sample.mask)
        cg = _pixels(sample.contour)
        mask_preds.append(mp)
        contour_preds.append(cp)
        mask_gts.append(mg)
        contour_gts.append(cg)
        entry = {"id": sample.id, "base": "contour"}
        entry.update(_seg_block([cp], [cg]))
        entry.update({f"mask_{k}": v for k, v in _seg_block([mp], [mg]).items()})
        report["images"].append(entry)
    report.update(_seg_block(contour_preds, contour_gts))
    report["branches"] = {
        "mask": _seg_block(mask_preds, mask_gts),
        "contour": _seg_block(contour_preds, contour_gts),
    }


def _finish_detection(report: dict, dets_per_image, gts_per_image) -> None:
    summary = detection_summary(dets_per_image, gts_per_image)
    report.update({
        "tp": summary.tp, "fp": summary.fp, "fa": summary.fa,
        "recall": summary.recall, "precision": summary.precision,
        "f1": summary.f1, "ap50": summary.ap50,
    })


def _eval_detector(ckpt_path, corpus, task: Task, report: dict) -> None:
    det = load_detector(ckpt_path)
    if det.cfg.task is not task:
        raise ConfigurationError(
            f"checkpoint holds a {det.cfg.task.value} detector, asked for {task.value}")
    base = {Task.DRC: "layout", Task.MRC: "mask", Task.LRC: "contour"}[task]
    dets_per_image, gts_per_image = [], []
    for sample in corpus.samples:
        primary, secondary = detector_inputs(task, sample)
        inputs = primary if secondary is None else (primary, secondary)
        raw = det.detect(task, inputs)
        boxes = to_pixel_boxes(raw, corpus.raster_size)
        gts = _gt_for_task(sample, task)
        dets_per_image.append(boxes)
        gts_per_image.append(gts)
        entry = {"id": sample.id, "base": base}
        entry.update(_image_detection_entry(boxes, gts))
        report["images"].append(entry)
    _finish_detection(report, dets_per_image, gts_per_image)


def _eval_unified(ckpt_path, corpus, report: dict) -> None:
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.kind != "joint":
        raise ConfigurationError(
            f"unified evaluation needs a joint checkpoint, got {ckpt.kind!r}")
    gen = load_generator(ckpt_path)
    det = load_detector(ckpt_path)
    mask_preds, contour_preds, mask_gts, contour_gts = [], [], [], []
    dets_per_image, gts_per_image = [], []
    for sample, (mask_prob, contour_prob, fused) in zip(
            corpus.samples, _generator_outputs(gen, corpus.samples)):
        cp = (contour_prob.numpy() >= 0.5)
        mp = (mask_prob.numpy() >= 0.5)
        cg = _pixels(sample.contour)
        mg = _pixels(sample.mask)
        contour_preds.append(cp)
        mask_preds.append(mp)
        contour_gts.append(cg)
        mask_gts.append(mg)

        contour_hard = torch.from_numpy(cp.astype(np.float32))
        layout = raster_batch([sample.layout])[0]
        raw = det.detect(Task.LRC, (contour_hard, layout), unified_ctx=fused)
        boxes = to_pixel_boxes(raw, corpus.raster_size)
        gts = _gt_for_task(sample, Task.LRC)
        dets_per_image.append(boxes)
        gts_per_image.append(gts)

        entry = {"id": sample.id, "base": "contour"}
        entry.update(_seg_block([cp], [cg]))
        entry.update(_image_detection_entry(boxes, gts))
        report["images"].append(entry)
    report.update(_seg_block(contour_preds, contour_gts))
    report["branches"] = {
        "mask": _seg_block(mask_preds, mask_gts),
        "contour": _seg_block(contour_preds, contour_gts),
    }
    _finish_detection(report, dets_per_image, gts_per_image)


# ----- artifacts -----

def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


_CSV_COLUMNS = ("id", "split", "n_gt", "tp", "fp", "fa", "mPA", "mIoU", "edge_f1")


def write_csv(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for entry in report["images"]:
            row = {**entry, "split": report["split"]}
            writer.writerow(["" if row.get(c) is None else row.get(c, "")
                             for c in _CSV_COLUMNS])
    return path


def _draw_box(draw: ImageDraw.ImageDraw, bbox, color, width: int = 2) -> None:
    x0, y0, x1, y1 = [v * _SCALE for v in bbox]
    draw.rectangle((x0, y0, max(x0 + 1, x1 - 1), max(y0 + 1, y1 - 1)),
                   outline=color, width=width)


def render_overlay(base: np.ndarray, detections: Sequence[dict],
                   ground_truth: Sequence[dict]) -> Image.Image:
    """Draw match outcomes over a raster: true positives red, missed
    ground truth blue, false alarms purple."""
    gray = (base.astype(np.uint8) * 191 + 32)
    img = Image.fromarray(gray, mode="L").convert("RGB")
    img = img.resize((img.width * _SCALE, img.height * _SCALE), Image.NEAREST)
    draw = ImageDraw.Draw(img)
    for gt in ground_truth:
        if not gt["matched"]:
            _draw_box(draw, gt["bbox_px"], _BLUE)
    for det in detections:
        _draw_box(draw, det["bbox_px"], _RED if det["matched"] else _PURPLE)
    return img


def render_report(report: dict, out_dir) -> List[Path]:
    """Re-materialize overlay images for every entry in a report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = read_manifest(report["corpus"])
    by_id = {rec["id"]: rec for rec in manifest.records}
    written = []
    for entry in report["images"]:
        if "detections" not in entry:
            continue
        rec = by_id.get(entry["id"])
        if rec is None:
            raise InputError(f"report references unknown sample {entry['id']!r}")
        sample = load_sample(report["corpus"], rec)
        base = _pixels(getattr(sample, entry["base"]))
        img = render_overlay(base, entry["detections"], entry["ground_truth"])
        path = out / f"{entry['id']}_overlay.png"
        img.save(path)
        written.append(path)
    return written


# ----- single-input prediction -----

def _load_layout_png(path, raster_size: Optional[int] = None) -> np.ndarray:
    img = Image.open(path).convert("L")
    arr = np.asarray(img) > 127
    if raster_size is not None and arr.shape != (raster_size, raster_size):
        raise InputError(
            f"{path} is {arr.shape}, model expects {(raster_size, raster_size)}")
    return arr


def _load_condition_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    try:
        return condition_from_json(obj)
    except KeyError as exc:
        raise InputError(f"condition file {path} is missing key {exc}") from None


def _save_binary_png(path, arr: np.ndarray) -> None:
    Image.fromarray(arr.astype(np.uint8) * 255, mode="L").save(path)


def _save_prob_png(path, prob: np.ndarray) -> None:
    Image.fromarray((np.clip(prob, 0.0, 1.0) * 255).astype(np.uint8), mode="L").save(path)


def predict_generation(ckpt_path, layout_png, condition_json, out_dir) -> dict:
    """Generator inference on one layout: binary + probability rasters."""
    gen = load_generator(ckpt_path)
    layout = _load_layout_png(layout_png, gen.cfg.raster_size)
    cond = _load_condition_json(condition_json)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(layout_png).stem
    result = gen.generate(layout, cond)
    mask = result.mask_prob.numpy()
    contour = result.contour_prob.numpy()
    paths = {
        "mask": out / f"{stem}_maskpred.png",
        "contour": out / f"{stem}_contourpred.png",
        "mask_prob": out / f"{stem}_maskprob.png",
        "contour_prob": out / f"{stem}_contourprob.png",
    }
    _save_binary_png(paths["mask"], mask >= 0.5)
    _save_binary_png(paths["contour"], contour >= 0.5)
    _save_prob_png(paths["mask_prob"], mask)
    _save_prob_png(paths["contour_prob"], contour)
    return {k: str(v) for k, v in paths.items()}


def _detections_jsonl(path, stem: str, task: Task, boxes) -> None:
    record = {
        "id": stem,
        "task": task.value,
        "detections": [
            {"class": str(b.klass.value), "bbox_px": [float(v) for v in b.bbox],
             "confidence": float(b.confidence)}
            for b in boxes
        ],
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _overlay_predictions(base: np.ndarray, boxes, conf_thr: float = 0.6) -> Image.Image:
    entries = [{"bbox_px": list(b.bbox), "matched": True}
               for b in boxes if b.confidence > conf_thr]
    return render_overlay(base, entries, [])


def predict_detection(ckpt_path, raster_png, out_dir) -> dict:
    """Detector inference on one raster (DRC: layout, MRC: mask).

    Standalone LRC checkpoints need two rasters and are served by the
    joint path instead.
    """
    det = load_detector(ckpt_path)
    task = det.cfg.task
    if task is Task.LRC:
        raise UsageError(
            "LRC prediction needs a contour and its layout; use a joint "
            "checkpoint, which generates the contour itself")
    raster = _load_layout_png(raster_png)
    raw = det.detect(task, torch.from_numpy(raster.astype(np.float32)))
    boxes = to_pixel_boxes(raw, raster.shape[0])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(raster_png).stem
    jsonl = out / f"{stem}_detections.jsonl"
    _detections_jsonl(jsonl, stem, task, boxes)
    overlay = out / f"{stem}_overlay.png"
    _overlay_predictions(raster, boxes).save(overlay)
    return {"detections": str(jsonl), "overlay": str(overlay)}


def predict_joint(ckpt_path, layout_png, condition_json, out_dir) -> dict:
    """Full pipeline on one layout: generate, then detect on the result."""
    gen = load_generator(ckpt_path)
    det = load_detector(ckpt_path)
    layout = _load_layout_png(layout_png, gen.cfg.raster_size)
    cond = _load_condition_json(condition_json)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(layout_png).stem

    result = gen.generate(layout, cond)
    contour_hard = (result.contour_prob >= 0.5).to(torch.float32)
    raw = det.detect(Task.LRC, (contour_hard, torch.from_numpy(layout.astype(np.float32))),
                     unified_ctx=result.fused)
    boxes = to_pixel_boxes(raw, gen.cfg.raster_size)

    paths = {
        "mask": out / f"{stem}_maskpred.png",
        "contour": out / f"{stem}_contourpred.png",
        "detections": out / f"{stem}_detections.jsonl",
        "overlay": out / f"{stem}_overlay.png",
    }
    _save_binary_png(paths["mask"], result.mask_prob.numpy() >= 0.5)
    _save_binary_png(paths["contour"], contour_hard.numpy().astype(bool))
    _detections_jsonl(paths["detections"], stem, Task.LRC, boxes)
    _overlay_predictions(contour_hard.numpy().astype(bool), boxes).save(paths["overlay"])
    return {k: str(v) for k, v in paths.items()}
