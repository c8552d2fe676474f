"""Vanilla input-gradient saliency, heatmap overlays and a localization score.

Saliency of pixel (y, x) is ``max_c |d logit_k / d I[c, y, x]|`` taken at the
model's input resolution, where ``k`` is the target class (the predicted
class by default) and ``I`` is the preprocessed input in [0, 1].

Heatmap color ramp (normalized saliency ``s`` in [0, 1], piecewise linear):

    s = 0.00  blue    (0, 0, 255)
    s = 0.25  cyan    (0, 255, 255)
    s = 0.50  green   (0, 255, 0)
    s = 0.75  yellow  (255, 255, 0)
    s = 1.00  red     (255, 0, 0)
"""

import copy
import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ImageIOError, UsageError
from .imaging import GlitchMask, ImageRGB, resize_bilinear
from .numerics import Tape, Tensor, backward

RAMP_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
RAMP_COLORS = np.array(
    [(0, 0, 255), (0, 255, 255), (0, 255, 0), (255, 255, 0), (255, 0, 0)], dtype=np.float64
)
HOTTEST = tuple(int(c) for c in RAMP_COLORS[-1])


@dataclass(eq=False)
class SaliencyMap:
    """Per-pixel saliency at model input resolution, shape ``(height, width)``."""

    values: np.ndarray
    target_class: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise UsageError(f"saliency must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise UsageError("saliency values must be finite and nonnegative")
        self.values = v

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def normalized_values(self):
        """Values divided by their maximum; all zeros stay zero."""
        peak = self.values.max()
        return self.values / peak if peak > 0 else np.zeros_like(self.values)


def _frozen(model):
    # parameter views that never receive gradients, so concurrent calls on a
    # shared model neither race on .grad nor touch its tensors
    tensors = getattr(model, "tensors", None)
    if not isinstance(tensors, OrderedDict):
        return model
    view = copy.copy(model)
    view.tensors = OrderedDict((k, Tensor(t.data, dtype=t.dtype)) for k, t in tensors.items())
    return view


def input_gradient(model, x, target_class=None):
    """(gradient, target_class) of one logit w.r.t. a ``[1, 3, H, W]`` input array.

    ``model`` is called as ``model(Tensor, training=False)`` and must return
    ``[1, K]`` logits.
    """
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[0] != 1:
        raise UsageError(f"expected a single [1, C, H, W] input, got shape {list(x.shape)}")
    net = _frozen(model)
    inp = Tensor(x, requires_grad=True, dtype=x.dtype if x.dtype == np.float64 else np.float32)
    with Tape() as tape:
        logits = net(inp, training=False)
        if logits.ndim != 2 or logits.shape[0] != 1:
            raise UsageError(f"model must return [1, K] logits, got {list(logits.shape)}")
        k = logits.shape[1]
        if target_class is None:
            target_class = int(np.argmax(logits.data[0]))
        elif isinstance(target_class, bool) or not isinstance(target_class, (int, np.integer)) \
                or not 0 <= target_class < k:
            raise UsageError(f"target class must be an integer in [0, {k}), got {target_class!r}")
        score = logits[0, int(target_class)]
    grads = backward(tape, score)
    g = grads.get(inp)
    if g is None:
        g = np.zeros_like(inp.data)
    return g, int(target_class)


def compute_saliency(model, image, target_class=None):
    """Saliency of ``target_class`` (default: the predicted class) for ``image``."""
    from .glitchnet.model import preprocess

    x = preprocess(image, model.config).data
    g, k = input_gradient(model, x, target_class)
    return SaliencyMap(np.abs(g[0].astype(np.float64)).max(axis=0), target_class=k)


def color_ramp(s):
    """Map normalized saliency (any shape, clipped to [0, 1]) to float RGB."""
    s = np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)
    return np.stack([np.interp(s, RAMP_STOPS, RAMP_COLORS[:, c]) for c in range(3)], axis=-1)


def render_heatmap(saliency, original, alpha=0.5):
    """Ramp-colored saliency, resized (bilinear) to ``original``, blended with weight ``alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise UsageError(f"alpha must lie in [0, 1], got {alpha}")
    if not isinstance(original, ImageRGB):
        original = ImageRGB(original)
    s = resize_bilinear(saliency.normalized_values[..., None], original.width, original.height)[..., 0]
    heat = color_ramp(s)
    out = (1.0 - alpha) * original.pixels.astype(np.float64) + alpha * heat
    return ImageRGB(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def top_pixels(saliency, top_fraction):
    """Flat indices of the ``max(1, round(q * N))`` most salient pixels.

    Ties are broken in scan order (row-major, earlier pixel first).
    """
    if not 0.0 < top_fraction <= 1.0:
        raise UsageError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    flat = saliency.values.ravel()
    k = max(1, int(round(top_fraction * flat.size)))
    return np.argsort(-flat, kind="stable")[:k]


def localization_score(saliency, mask, top_fraction=0.05):
    """Share of the top-``top_fraction`` salient pixels that lie inside ``mask``.

    The mask is resized to the saliency dims by nearest neighbour first.
    """
    if not isinstance(mask, GlitchMask):
        mask = GlitchMask(mask)
    if not mask.area:
        raise UsageError("cannot score localization against an empty mask")
    m = mask.resized(saliency.width, saliency.height).values.ravel()
    if not m.any():
        raise UsageError("mask vanishes when resized to the saliency resolution")
    idx = top_pixels(saliency, top_fraction)
    return float(m[idx].mean())


def write_raw_saliency(path, saliency):
    """Write values as flat little-endian float32 plus a ``.json`` sidecar with the dims."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(saliency.values.astype("<f4").tobytes())
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps({
            "width": saliency.width, "height": saliency.height, "dtype": "float32", "byte_order": "little",
            "layout": "row-major", "target_class": saliency.target_class,
        }, indent=2) + "\n")
    except OSError as e:
        raise ImageIOError(path, e.strerror or str(e)) from e
    return path


def read_raw_saliency(path):
    path = Path(path)
    try:
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        data = np.frombuffer(path.read_bytes(), dtype="<f4")
    except (OSError, ValueError) as e:
        raise ImageIOError(path, str(e)) from e
    if data.size != meta["width"] * meta["height"]:
        raise ImageIOError(path, f"expected {meta['width'] * meta['height']} floats, found {data.size}")
    return SaliencyMap(data.reshape(meta["height"], meta["width"]), target_class=meta.get("target_class", 0))
