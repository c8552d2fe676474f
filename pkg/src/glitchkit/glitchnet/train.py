"""Mini-batch Adam training of the detector."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..evalkit.manifest import require_both_classes
from ..imaging import read_image
from ..numerics import AdamState, Tape, Tensor, adam_step, backward, cross_entropy_loss
from ..seeding import derive_rng
from .checkpoint import ModelCheckpoint
from .config import GLITCH, NORMAL
from .model import GlitchNet, inference_batch_size, predict_logits, preprocess

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: GlitchNet
    checkpoint: ModelCheckpoint
    history: list = field(default_factory=list)
    best_epoch: int = 0


def load_dataset(manifest, config):
    """Preprocess every record into ``(X[N,3,H,W], y[N])``."""
    if not len(manifest):
        return np.zeros((0, 3, config.input_height, config.input_width), np.float32), np.zeros(0, np.int64)
    xs, ys = [], []
    for r in manifest.records:
        xs.append(preprocess(read_image(manifest.resolve(r.image_path)), config).data)
        ys.append(GLITCH if r.label == "glitch" else NORMAL)
    return np.concatenate(xs), np.asarray(ys, dtype=np.int64)


def accuracy(model, x, y, batch_size=64):
    if len(y) == 0:
        return None
    batch_size = inference_batch_size(model.config, batch_size)
    correct = 0
    for s in range(0, len(y), batch_size):
        logits = predict_logits(model, x[s:s + batch_size])
        correct += int((logits.argmax(axis=1) == y[s:s + batch_size]).sum())
    return correct / len(y)


def _batch_loss(model, xb, yb, training):
    return float(cross_entropy_loss(model.forward(Tensor(xb), training=training), yb).data)


def initial_loss(model, x, y, batch_size):
    """Mean training-mode loss at the current weights; running stats are left untouched."""
    saved = {k: t.data.copy() for k, t in model.tensors.items() if not t.requires_grad}
    total = 0.0
    for s in range(0, len(y), batch_size):
        total += _batch_loss(model, x[s:s + batch_size], y[s:s + batch_size], True) * len(y[s:s + batch_size])
    for k, v in saved.items():
        model.tensors[k].data = v
    return total / len(y)


def train(manifest, model_cfg, train_cfg, val_manifest=None, log_path=None):
    """Train from ``train_cfg.seed``; returns the best-validation model when a
    validation manifest is given (earliest epoch wins ties), otherwise the final one.

    The history holds an epoch-0 row (loss at initialization) followed by one
    row per epoch: ``{"epoch", "loss", "train_acc", "val_acc"}``.
    """
    require_both_classes(manifest)
    x, y = load_dataset(manifest, model_cfg)
    xv = yv = None
    if val_manifest is not None and len(val_manifest):
        xv, yv = load_dataset(val_manifest, model_cfg)
    return train_arrays(x, y, model_cfg, train_cfg, xv, yv, log_path=log_path)


def train_arrays(x, y, model_cfg, train_cfg, xv=None, yv=None, log_path=None):
    if len(np.unique(y)) < 2:
        raise DataError(f"training data must contain both classes, got labels {sorted(set(y.tolist()))}")
    model = GlitchNet(model_cfg, seed=train_cfg.seed)
    params = model.parameters()
    state = AdamState(learning_rate=train_cfg.learning_rate)
    bs = train_cfg.batch_size
    n = len(y)

    history = [{
        "epoch": 0,
        "loss": initial_loss(model, x, y, bs),
        "train_acc": accuracy(model, x, y),
        "val_acc": accuracy(model, xv, yv) if yv is not None else None,
    }]
    best_acc, best_epoch, best_arrays = -1.0, 0, model.state_arrays()
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        if log_fh:
            log_fh.write(json.dumps(history[0], sort_keys=True) + "\n")
        for epoch in range(1, train_cfg.epochs + 1):
            order = derive_rng(train_cfg.seed, "shuffle", epoch).permutation(n) if train_cfg.shuffle else np.arange(n)
            running = 0.0
            for s in range(0, n, bs):
                idx = order[s:s + bs]
                if len(idx) == 1 and n > 1:
                    # a single-image batch leaves BN with one value per channel at the deepest layer
                    idx = order[s - 1:s + 1]
                with Tape() as tape:
                    loss = cross_entropy_loss(model.forward(Tensor(x[idx]), training=True), y[idx])
                grads = backward(tape, loss)
                adam_step(params, [grads.get(p) for p in params], state)
                running += float(loss.data) * len(idx)
            row = {
                "epoch": epoch,
                "loss": running / n,
                "train_acc": accuracy(model, x, y),
                "val_acc": accuracy(model, xv, yv) if yv is not None else None,
            }
            history.append(row)
            if log_fh:
                log_fh.write(json.dumps(row, sort_keys=True) + "\n")
                log_fh.flush()
            log.info("epoch %d loss %.4f train_acc %.3f val_acc %s", epoch, row["loss"], row["train_acc"], row["val_acc"])
            if yv is not None and row["val_acc"] > best_acc:
                best_acc, best_epoch, best_arrays = row["val_acc"], epoch, model.state_arrays()
    finally:
        if log_fh:
            log_fh.close()

    if yv is not None and train_cfg.epochs > 0:
        model.load_arrays(best_arrays)
    else:
        best_epoch = train_cfg.epochs
    return TrainResult(model, ModelCheckpoint.from_model(model), history, best_epoch)
