"""Confusion counts, the four evaluation metrics, and batch evaluation of a detector."""

import json
from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from ..imaging import read_image

UNDEFINED = "undefined"


@dataclass(frozen=True)
class Metrics:
    """Glitch is the positive class. Undefined ratios are ``None``."""

    tp: int
    fp: int
    tn: int
    fn: int
    precision: float = None
    recall: float = None
    f1: float = None
    accuracy: float = None

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self, digits=None):
        out = {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}
        for name in ("precision", "recall", "f1", "accuracy"):
            v = getattr(self, name)
            out[name] = UNDEFINED if v is None else (round(v, digits) if digits is not None else v)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def table(self, digits=3):
        def fmt(v):
            return UNDEFINED if v is None else f"{v:.{digits}f}"

        rows = [
            ("precision", fmt(self.precision)),
            ("recall", fmt(self.recall)),
            ("f1", fmt(self.f1)),
            ("accuracy", fmt(self.accuracy)),
            ("tp/fp/tn/fn", f"{self.tp}/{self.fp}/{self.tn}/{self.fn}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _ratio(num, den):
    return num / den if den else None


def compute_metrics(tp, fp, tn, fn):
    counts = (tp, fp, tn, fn)
    if any(int(c) != c or c < 0 for c in counts):
        raise UsageError(f"confusion counts must be non-negative integers, got {counts}")
    tp, fp, tn, fn = (int(c) for c in counts)
    total = tp + fp + tn + fn
    if total == 0:
        raise UsageError("cannot compute metrics from all-zero confusion counts")
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f1 = 2 * p * r / (p + r) if p is not None and r is not None and p + r > 0 else None
    return Metrics(tp, fp, tn, fn, p, r, f1, (tp + tn) / total)


@dataclass(frozen=True)
class Verdict:
    path: str
    truth: str
    prediction: str
    p_glitch: float


def tally(verdicts):
    tp = sum(v.truth == "glitch" and v.prediction == "glitch" for v in verdicts)
    fp = sum(v.truth == "normal" and v.prediction == "glitch" for v in verdicts)
    tn = sum(v.truth == "normal" and v.prediction == "normal" for v in verdicts)
    fn = sum(v.truth == "glitch" and v.prediction == "normal" for v in verdicts)
    return compute_metrics(tp, fp, tn, fn)


def evaluate(model, manifest, batch_size=32):
    """Predict every record and tally confusion counts.

    ``model`` is a :class:`~glitchkit.glitchnet.GlitchNet` (batched inference)
    or any callable ``image -> (label, probabilities)``.
    Returns ``(Metrics, [Verdict, ...])`` with verdicts in manifest order.
    """
    from ..glitchnet.model import GlitchNet, inference_batch_size, predict_logits, preprocess
    from ..numerics.nn import _softmax

    verdicts = []
    if isinstance(model, GlitchNet):
        batch_size = inference_batch_size(model.config, batch_size)
        for start in range(0, len(manifest.records), batch_size):
            chunk = manifest.records[start:start + batch_size]
            batch = np.concatenate(
                [preprocess(read_image(manifest.resolve(r.image_path)), model.config).data for r in chunk]
            )
            logits = predict_logits(model, batch)
            probs = _softmax(logits.astype(np.float64))
            for r, lg, pr in zip(chunk, logits, probs):
                pred = "glitch" if lg[1] > lg[0] else "normal"
                verdicts.append(Verdict(r.image_path, r.label, pred, float(pr[1])))
    else:
        for r in manifest.records:
            label, probs = model(read_image(manifest.resolve(r.image_path)))
            verdicts.append(Verdict(r.image_path, r.label, label, float(probs[1])))
    if not verdicts:
        raise UsageError("cannot evaluate an empty manifest")
    return tally(verdicts), verdicts
