"""Dataset manifests (JSON Lines, one record per line).

Record fields:

``image_path``   path to the PNG, relative to the manifest's directory (or absolute)
``label``        ``"normal"`` or ``"glitch"``
``glitch_class`` one of :class:`GlitchClass` values, or null
``mask_path``    ground-truth mask PNG (255 = glitch pixel), or null
``generator``    ``captured`` | ``rule_R`` | ``rule_F`` | ``injection``
``seed``         integer seed that produced the record, or null
``meta``         free-form object (scene, fault, frame index, run seed, ...)
"""

import enum
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import DataError, ImageIOError, UsageError
from ..seeding import derive_rng

log = logging.getLogger(__name__)

LABEL_VALUES = ("normal", "glitch")
GENERATORS = ("captured", "rule_R", "rule_F", "injection")


class GlitchClass(str, enum.Enum):
    ABNORMAL_COLOR_BLOCK = "abnormal_color_block"
    RANDOM_NOISE = "random_noise"
    PARTIAL_REPETITION = "partial_repetition"
    FRAME_OVERLAY = "frame_overlay"
    OBJECT_MISSING = "object_missing"
    ABNORMAL_TEXT = "abnormal_text"
    OVEREXPOSED = "overexposed"
    BLACK_BORDER = "black_border"


@dataclass
class Record:
    image_path: str
    label: str
    glitch_class: str = None
    mask_path: str = None
    generator: str = "captured"
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in LABEL_VALUES:
            raise UsageError(f"{self.image_path}: label must be one of {LABEL_VALUES}, got {self.label!r}")
        if self.generator not in GENERATORS:
            raise UsageError(f"{self.image_path}: generator must be one of {GENERATORS}, got {self.generator!r}")
        if self.glitch_class is not None:
            self.glitch_class = GlitchClass(self.glitch_class).value
        if self.label == "glitch" and self.generator != "captured" and not self.mask_path:
            raise UsageError(f"{self.image_path}: generated glitch records must carry a mask_path")

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


class DatasetManifest:
    def __init__(self, records=(), root="."):
        self.records = list(records)
        self.root = Path(root)
        seen = set()
        for r in self.records:
            if r.image_path in seen:
                raise UsageError(f"duplicate image_path in manifest: {r.image_path}")
            seen.add(r.image_path)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def resolve(self, rel):
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def counts(self):
        return {lab: sum(r.label == lab for r in self.records) for lab in LABEL_VALUES}

    def subset(self, records):
        return DatasetManifest(records, self.root)

    def rebased(self, root):
        """Same records with paths rewritten relative to ``root``."""
        root = Path(root)
        out = []
        for r in self.records:
            img = _relative(self.resolve(r.image_path), root)
            mask = _relative(self.resolve(r.mask_path), root) if r.mask_path else None
            out.append(replace(r, image_path=img, mask_path=mask))
        return DatasetManifest(out, root)

    def __add__(self, other):
        if other.root.resolve() != self.root.resolve():
            other = other.rebased(self.root)
        return DatasetManifest(self.records + other.records, self.root)

    def save(self, path):
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            manifest = self if path.parent.resolve() == self.root.resolve() else self.rebased(path.parent)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for r in manifest.records:
                    fh.write(r.to_json() + "\n")
        except OSError as exc:
            raise ImageIOError(path, f"cannot write manifest ({exc})") from exc
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        records = []
        try:
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        d = json.loads(line)
                        records.append(Record(**d))
                    except json.JSONDecodeError as exc:
                        raise UsageError(f"{path}: line {lineno}: {exc.msg}") from None
                    except (TypeError, ValueError) as exc:
                        raise UsageError(f"{path}: line {lineno}: {exc}") from None
        except OSError as exc:
            raise ImageIOError(path, f"cannot read manifest ({exc})") from exc
        return cls(records, path.parent)


def _relative(p, root):
    p = Path(p).resolve()
    try:
        return p.relative_to(Path(root).resolve()).as_posix()
    except ValueError:
        return str(p)


def _allocate(n, fractions):
    # largest-remainder rounding so the parts always sum to n
    exact = [f * n for f in fractions]
    counts = [int(np.floor(e)) for e in exact]
    order = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_manifest(manifest, fractions=(0.7, 0.15, 0.15), seed=42):
    """Seeded, label-stratified split into (train, val, test).

    Each label's records are shuffled independently and cut by
    largest-remainder rounding of ``fractions``. Records keep their original
    relative order inside each split.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3:
        raise UsageError(f"need three split fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions) or not np.isclose(sum(fractions), 1.0):
        raise UsageError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    buckets = [[], [], []]
    for label in LABEL_VALUES:
        idx = [i for i, r in enumerate(manifest.records) if r.label == label]
        perm = derive_rng(seed, "split", label).permutation(len(idx))
        shuffled = [idx[p] for p in perm]
        start = 0
        for b, count in enumerate(_allocate(len(idx), fractions)):
            buckets[b].extend(shuffled[start:start + count])
            start += count
    names = ("train", "val", "test")
    out = []
    for name, frac, bucket in zip(names, fractions, buckets):
        part = manifest.subset([manifest.records[i] for i in sorted(bucket)])
        counts = part.counts()
        if frac > 0 and min(counts.values()) == 0:
            log.warning("split %r has no records of class %s", name,
                        " or ".join(k for k, v in counts.items() if v == 0))
        out.append(part)
    return tuple(out)


def require_both_classes(manifest):
    counts = manifest.counts()
    if min(counts.values()) == 0:
        raise DataError(f"manifest must contain both classes, got {counts}")
