"""Desk-scale end-to-end run: synthesize, split, train, evaluate, localize.

The dataset mirrors the shape of a full-size study at laptop scale:
fault-free rendered frames as normals, half of the glitches from render
pipeline fault injection and half from the pixel rules applied to some of
those normals. A separate pool of held-out glitches (fresh scenes) scores
saliency localization.
"""

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment_rules import RULES, generate_rule_dataset
from .evalkit import DatasetManifest, evaluate, split_manifest
from .glitchnet import TrainConfig, desk_config, save_checkpoint, train
from .glitchnet.checkpoint import encode_checkpoint
from .imaging import read_image, read_mask
from .rendersim import fault_cycle, generate_injection_dataset, random_fault, random_scene, scene_seeds
from .saliency import compute_saliency, localization_score, render_heatmap
from .seeding import derive_rng

log = logging.getLogger(__name__)

CLEARFLAG_ONSET = 1


@dataclass
class DeskSettings:
    seed: int = 42
    scenes: int = 200
    width: int = 64
    height: int = 32
    frames: int = 4
    injected: int = 100
    ruled: int = 100
    games: int = 2
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    saliency_scenes: int = 60
    top_fraction: float = 0.05
    max_mask_density: float = 1 / 3
    figures: bool = True


@dataclass
class DeskResult:
    metrics: object
    verdicts: list
    history: list
    best_epoch: int
    counts: dict
    checkpoint_sha256: str
    report_sha256: str
    saliency: dict = field(default_factory=dict)
    out_dir: Path = None


def _scene_faults(scenes, seed, count, stream):
    """``count`` faults dealt round-robin over the scenes, kinds cycling."""
    faults = [[] for _ in scenes]
    for k, kind in enumerate(fault_cycle(count)):
        i = k % len(scenes)
        fseed = int(derive_rng(seed, stream, "fault", k).integers(0, 2**62))
        onset = CLEARFLAG_ONSET if kind == "clearflag_override" else None
        faults[i].append(random_fault(fseed, scenes[i], kind, onset_frame=onset))
    return faults


def game_styles(seed, games):
    return scene_seeds(seed, games, "games")


def synthesize(out_dir, seed, n_scenes, frames, n_injected, n_ruled, games=2, stream="desk", size=(64, 32)):
    """Manifest of rendered normals, injected glitches and rule glitches under ``out_dir``.

    Each scene contributes its last fault-free frame as a normal. Scenes are
    dealt round-robin to ``games`` game styles; rule glitches are derived
    from ``n_ruled`` randomly chosen normals.
    """
    out_dir = Path(out_dir)
    styles = game_styles(seed, games)
    scenes = [random_scene(s, size[0], size[1], frames, style=styles[i % games])
              for i, s in enumerate(scene_seeds(seed, n_scenes, stream))]
    faults = _scene_faults(scenes, seed, n_injected, stream)
    injected = generate_injection_dataset(scenes, faults, seed, out_dir, last_frame_only=True)
    normals = [r for r in injected.records if r.label == "normal"]
    if n_ruled > len(normals):
        raise ValueError(f"{n_ruled} rule glitches requested from {len(normals)} normals")
    pick = np.sort(derive_rng(seed, stream, "rule_sources").permutation(len(normals))[:n_ruled])
    ruled = generate_rule_dataset(injected.subset([normals[i] for i in pick]), RULES, seed, out_dir,
                                  include_normals=False)
    return injected + ruled


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_verdicts(path, verdicts):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "truth", "prediction", "p_glitch"])
        for v in verdicts:
            w.writerow([v.path, v.truth, v.prediction, f"{v.p_glitch:.6f}"])
    return path


def saliency_study(model, manifest, top_fraction, max_density, limit_rows=6, figure=None):
    """Localization scores on correctly classified glitches whose mask density is at most ``max_density``.

    Density is measured at model input resolution. Returns a summary dict.
    """
    from .glitchnet.model import predict

    cfg = model.config
    rows, scored, panel = [], [], []
    for r in manifest.records:
        if r.label != "glitch" or r.mask_path is None:
            continue
        image = read_image(manifest.resolve(r.image_path))
        mask = read_mask(manifest.resolve(r.mask_path))
        small = mask.resized(cfg.input_width, cfg.input_height)
        label, _ = predict(model, image)
        density = small.density
        entry = {"path": r.image_path, "glitch_class": r.glitch_class, "generator": r.generator,
                 "density": density, "correct": label == "glitch"}
        if label == "glitch" and 0 < density <= max_density:
            sal = compute_saliency(model, image)
            entry["score"] = localization_score(sal, mask, top_fraction)
            scored.append(entry)
            if figure is not None and len(panel) < limit_rows:
                panel.append((f"{r.glitch_class} ({r.generator})", image, render_heatmap(sal, image, 0.5), mask))
        rows.append(entry)
    scores = [e["score"] for e in scored]
    dens = [e["density"] for e in scored]
    mean_score = float(np.mean(scores)) if scores else None
    mean_density = float(np.mean(dens)) if dens else None
    if figure is not None and panel:
        from .plots import saliency_panel
        saliency_panel(panel, figure)
    return {
        "candidates": sum(1 for e in rows),
        "correct": sum(1 for e in rows if e["correct"]),
        "scored": len(scored),
        "top_fraction": top_fraction,
        "max_mask_density": max_density,
        "mean_score": mean_score,
        "mean_density": mean_density,
        "ratio": mean_score / mean_density if scored and mean_density > 0 else None,
        "items": rows,
    }


def run_desk_experiment(out_dir, settings=DeskSettings()):
    out_dir = Path(out_dir)
    s = settings
    data = synthesize(out_dir / "data", s.seed, s.scenes, s.frames, s.injected, s.ruled, s.games,
                      size=(s.width, s.height))
    data.save(out_dir / "data" / "all.jsonl")
    train_m, val_m, test_m = split_manifest(data, (0.7, 0.15, 0.15), seed=s.seed)
    for name, m in (("train", train_m), ("val", val_m), ("test", test_m)):
        m.save(out_dir / "data" / f"{name}.jsonl")

    model_cfg = desk_config()
    train_cfg = TrainConfig(batch_size=s.batch_size, learning_rate=s.learning_rate, epochs=s.epochs, seed=s.seed)
    result = train(train_m, model_cfg, train_cfg, val_manifest=val_m, log_path=out_dir / "train_log.jsonl")
    ckpt_path = save_checkpoint(out_dir / "model.glib", result.checkpoint)

    metrics, verdicts = evaluate(result.model, test_m)
    write_verdicts(out_dir / "verdicts.csv", verdicts)
    counts = {
        "all": data.counts(), "train": train_m.counts(), "val": val_m.counts(), "test": test_m.counts(),
        "glitch_by_generator": _by(data, "generator"), "glitch_by_class": _by(data, "glitch_class"),
    }
    report = {"seed": s.seed, "metrics": metrics.to_dict(), "best_epoch": result.best_epoch,
              "counts": counts, "checkpoint_sha256": hashlib.sha256(encode_checkpoint(result.checkpoint)).hexdigest()}
    report_path = out_dir / "metrics.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    held = synthesize(out_dir / "saliency_data", s.seed, s.saliency_scenes, s.frames, s.saliency_scenes,
                      s.saliency_scenes, s.games, stream="saliency", size=(s.width, s.height))
    held.save(out_dir / "saliency_data" / "all.jsonl")
    study = saliency_study(result.model, held, s.top_fraction, s.max_mask_density,
                           figure=out_dir / "saliency_examples.png" if s.figures else None)
    (out_dir / "saliency.json").write_text(json.dumps(study, indent=2) + "\n")

    if s.figures:
        from .plots import confusion_matrix, training_curves
        training_curves(result.history, out_dir / "training_curves.png")
        confusion_matrix(metrics, out_dir / "confusion.png")

    return DeskResult(metrics, verdicts, result.history, result.best_epoch, counts,
                      _digest(ckpt_path), _digest(report_path), study, out_dir)


def _by(manifest, attr):
    out = {}
    for r in manifest.records:
        if r.label == "glitch":
            key = getattr(r, attr)
            out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))
