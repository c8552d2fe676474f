"""Report figures rendered with matplotlib's Agg backend."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def training_curves(history, path):
    epochs = [h["epoch"] for h in history]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [h["loss"] for h in history], marker=".")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy")
    ax_loss.set_title("training loss")
    ax_acc.plot(epochs, [h["train_acc"] for h in history], marker=".", label="train")
    if any(h.get("val_acc") is not None for h in history):
        ax_acc.plot(epochs, [np.nan if h["val_acc"] is None else h["val_acc"] for h in history],
                    marker=".", label="validation")
    ax_acc.set_ylim(0, 1.02)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_title("accuracy")
    ax_acc.legend(loc="lower right")
    fig.tight_layout()
    return _save(fig, path)


def confusion_matrix(metrics, path):
    grid = np.array([[metrics.tn, metrics.fp], [metrics.fn, metrics.tp]])
    fig, ax = plt.subplots(figsize=(4, 3.6))
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center",
                color="white" if v > grid.max() / 2 else "black", fontsize=14)
    ax.set_xticks([0, 1], ["normal", "glitch"])
    ax.set_yticks([0, 1], ["normal", "glitch"])
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fmt = lambda v: "undefined" if v is None else f"{v:.3f}"  # noqa: E731
    ax.set_title(f"P {fmt(metrics.precision)}  R {fmt(metrics.recall)}  F1 {fmt(metrics.f1)}", fontsize=10)
    fig.tight_layout()
    return _save(fig, path)


def saliency_panel(rows, path):
    """One row per ``(title, image, heatmap, mask_or_None)``."""
    rows = list(rows)
    fig, axes = plt.subplots(len(rows), 3, figsize=(9, 1.9 * len(rows) + 0.3), squeeze=False)
    for ax_row, (title, image, heat, mask) in zip(axes, rows):
        ax_row[0].imshow(image.pixels)
        ax_row[0].set_title(title, fontsize=8)
        ax_row[1].imshow(heat.pixels)
        ax_row[1].set_title("saliency", fontsize=8)
        if mask is not None:
            ax_row[2].imshow(mask.values, cmap="gray", vmin=0, vmax=1)
        ax_row[2].set_title("ground-truth mask", fontsize=8)
        for ax in ax_row:
            ax.axis("off")
    fig.tight_layout()
    return _save(fig, path)
