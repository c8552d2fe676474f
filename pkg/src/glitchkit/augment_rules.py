"""Heuristic glitch synthesis: the four pixel-level rules behind the Rule(R)/Rule(F) baselines.

Every rule picks its rectangles from a generator derived from the given
seed, edits a copy of the image, and returns the edited image together with
a mask of every pixel it wrote. Pixels outside the mask are never touched.

Rectangles obey ``RegionConstraints``: each one covers between
``min_frac`` and ``max_frac`` of the image area (aspect ratio within 1:3
and 3:1 when the image allows it).
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UsageError
from .evalkit.manifest import DatasetManifest, Record
from .imaging import GlitchMask, ImageRGB, read_image, write_image, write_mask
from .seeding import derive_rng, item_seed

log = logging.getLogger(__name__)

RULES = ("partial_repetition", "solid_color_block", "mosaic", "random_noise")
PALETTE_MODES = ("random_rgb", "fixed_palette")
FIXED_PALETTE = {
    "red": (255, 0, 0),
    "black": (0, 0, 0),
    "pink": (255, 105, 180),
    "cyan": (0, 255, 255),
}
GLITCH_CLASS = {
    "partial_repetition": "partial_repetition",
    "solid_color_block": "abnormal_color_block",
    "mosaic": "abnormal_color_block",
    "random_noise": "random_noise",
}
MOSAIC_PATCH = (4, 32)
BLOCK_COUNT = (3, 5)


@dataclass(frozen=True)
class RegionConstraints:
    min_frac: float = 0.02
    max_frac: float = 0.25

    def __post_init__(self):
        if not 0 < self.min_frac <= self.max_frac <= 1:
            raise UsageError(f"need 0 < min_frac <= max_frac <= 1, got {self.min_frac}, {self.max_frac}")


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def slices(self):
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    @property
    def area(self):
        return self.w * self.h


@dataclass(frozen=True)
class RuleSpec:
    rule: str
    palette_mode: str = "random_rgb"
    seed: int = 0
    constraints: RegionConstraints = RegionConstraints()

    def __post_init__(self):
        if self.rule not in RULES:
            raise UsageError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.palette_mode not in PALETTE_MODES:
            raise UsageError(f"unknown palette mode {self.palette_mode!r}; expected one of {PALETTE_MODES}")


def sample_rect(rng, width, height, constraints, min_side=1, max_w=None, max_h=None):
    """A rectangle whose area fraction lies within ``constraints``."""
    max_w = width if max_w is None else max_w
    max_h = height if max_h is None else max_h
    total = width * height
    lo, hi = constraints.min_frac * total, constraints.max_frac * total
    for _ in range(200):
        frac = rng.uniform(constraints.min_frac, constraints.max_frac)
        aspect = np.exp(rng.uniform(np.log(1 / 3), np.log(3)))
        w = int(np.clip(round(np.sqrt(frac * total * aspect)), min_side, max_w))
        h = int(np.clip(round(frac * total / w), min_side, max_h))
        if lo <= w * h <= hi and w >= min_side and h >= min_side:
            x = int(rng.integers(0, width - w + 1))
            y = int(rng.integers(0, height - h + 1))
            return Rect(x, y, w, h)
    # narrow ranges can defeat rejection sampling; fall back to every feasible size
    sizes = [(w, h) for w in range(min_side, max_w + 1) for h in range(min_side, max_h + 1) if lo <= w * h <= hi]
    if sizes:
        w, h = sizes[int(rng.integers(len(sizes)))]
        return Rect(int(rng.integers(0, width - w + 1)), int(rng.integers(0, height - h + 1)), w, h)
    raise UsageError(
        f"image {width}x{height} too small for a {min_side}px-sided region covering "
        f"{constraints.min_frac:.0%}-{constraints.max_frac:.0%} of its area"
    )


def _rng(seed, rule):
    return derive_rng(seed, "augment_rules", rule)


def _as_image(img):
    return img if isinstance(img, ImageRGB) else ImageRGB(img)


def plan_partial_repetition(width, height, seed, constraints=RegionConstraints()):
    """(source rect, axis) where axis is ``"horizontal"`` or ``"vertical"``."""
    rng = _rng(seed, "partial_repetition")
    axes = [a for a, room in (("horizontal", width > 1), ("vertical", height > 1)) if room]
    if not axes:
        raise UsageError(f"image {width}x{height} too small for partial repetition")
    axis = axes[int(rng.integers(len(axes)))]
    # the source must leave room along the axis so at least one tile is written
    if axis == "horizontal":
        rect = sample_rect(rng, width, height, constraints, max_w=max(1, width // 2))
    else:
        rect = sample_rect(rng, width, height, constraints, max_h=max(1, height // 2))
    return rect, axis


def apply_partial_repetition(img, seed, constraints=RegionConstraints()):
    """Tile a source rectangle across its whole row band (or column band)."""
    img = _as_image(img)
    rect, axis = plan_partial_repetition(img.width, img.height, seed, constraints)
    src = img.pixels
    out = src.copy()
    mask = np.zeros((img.height, img.width), dtype=bool)
    tile = src[rect.slices]
    if axis == "horizontal":
        rows = slice(rect.y, rect.y + rect.h)
        first = rect.x - ((rect.x + rect.w - 1) // rect.w) * rect.w
        for x0 in range(first, img.width, rect.w):
            if x0 == rect.x:
                continue
            a, b = max(x0, 0), min(x0 + rect.w, img.width)
            out[rows, a:b] = tile[:, a - x0:b - x0]
            mask[rows, a:b] = True
    else:
        cols = slice(rect.x, rect.x + rect.w)
        first = rect.y - ((rect.y + rect.h - 1) // rect.h) * rect.h
        for y0 in range(first, img.height, rect.h):
            if y0 == rect.y:
                continue
            a, b = max(y0, 0), min(y0 + rect.h, img.height)
            out[a:b, cols] = tile[a - y0:b - y0]
            mask[a:b, cols] = True
    return ImageRGB(out), GlitchMask(mask)


def plan_solid_color_blocks(width, height, seed, palette_mode="random_rgb", constraints=RegionConstraints()):
    """List of (rect, rgb) in painting order."""
    if palette_mode not in PALETTE_MODES:
        raise UsageError(f"unknown palette mode {palette_mode!r}")
    rng = _rng(seed, "solid_color_block")
    count = int(rng.integers(BLOCK_COUNT[0], BLOCK_COUNT[1] + 1))
    palette = list(FIXED_PALETTE.values())
    blocks = []
    for _ in range(count):
        rect = sample_rect(rng, width, height, constraints)
        if palette_mode == "fixed_palette":
            color = palette[int(rng.integers(len(palette)))]
        else:
            color = tuple(int(c) for c in rng.integers(0, 256, size=3))
        blocks.append((rect, color))
    return blocks


def apply_solid_color_block(img, seed, palette_mode="random_rgb", constraints=RegionConstraints()):
    """Paint 3-5 solid rectangles one after another; later blocks may cover earlier ones."""
    img = _as_image(img)
    out = img.pixels.copy()
    mask = np.zeros((img.height, img.width), dtype=bool)
    for rect, color in plan_solid_color_blocks(img.width, img.height, seed, palette_mode, constraints):
        out[rect.slices] = color
        mask[rect.slices] = True
    return ImageRGB(out), GlitchMask(mask)


def plan_mosaic(width, height, seed, constraints=RegionConstraints()):
    """(rect, patch size)."""
    rng = _rng(seed, "mosaic")
    rect = sample_rect(rng, width, height, constraints, min_side=2)
    hi = min(MOSAIC_PATCH[1], rect.w, rect.h)
    lo = min(MOSAIC_PATCH[0], hi)
    patch = int(rng.integers(lo, hi + 1))
    return rect, patch


def apply_mosaic(img, seed, constraints=RegionConstraints()):
    """Pixelate a rectangle: each patch takes the original color of its center pixel.

    Patches tile the rectangle from its top-left corner; patches on the
    right/bottom edge are clipped and use the center of the clipped patch.
    """
    img = _as_image(img)
    rect, patch = plan_mosaic(img.width, img.height, seed, constraints)
    src = img.pixels
    out = src.copy()
    for py in range(rect.y, rect.y + rect.h, patch):
        ph = min(patch, rect.y + rect.h - py)
        for px in range(rect.x, rect.x + rect.w, patch):
            pw = min(patch, rect.x + rect.w - px)
            out[py:py + ph, px:px + pw] = src[py + ph // 2, px + pw // 2]
    mask = np.zeros((img.height, img.width), dtype=bool)
    mask[rect.slices] = True
    return ImageRGB(out), GlitchMask(mask)


def plan_random_noise(width, height, seed, constraints=RegionConstraints()):
    return sample_rect(_rng(seed, "random_noise"), width, height, constraints)


def apply_random_noise(img, seed, constraints=RegionConstraints()):
    """Replace a rectangle with i.i.d. uniform RGB noise."""
    img = _as_image(img)
    rect = plan_random_noise(img.width, img.height, seed, constraints)
    noise_rng = derive_rng(seed, "augment_rules", "random_noise", "pixels")
    out = img.pixels.copy()
    out[rect.slices] = noise_rng.integers(0, 256, size=(rect.h, rect.w, 3), dtype=np.uint8)
    mask = np.zeros((img.height, img.width), dtype=bool)
    mask[rect.slices] = True
    return ImageRGB(out), GlitchMask(mask)


def apply_rule(img, spec):
    if spec.rule == "partial_repetition":
        return apply_partial_repetition(img, spec.seed, spec.constraints)
    if spec.rule == "solid_color_block":
        return apply_solid_color_block(img, spec.seed, spec.palette_mode, spec.constraints)
    if spec.rule == "mosaic":
        return apply_mosaic(img, spec.seed, spec.constraints)
    return apply_random_noise(img, spec.seed, spec.constraints)


def generate_rule_dataset(normal_manifest, rules, seed, out_dir, palette_mode="random_rgb",
                          constraints=RegionConstraints(), include_normals=True):
    """Derive one glitch image from each normal record, cycling through ``rules``.

    Normal record ``i`` gets rule ``rules[i % len(rules)]`` and seed
    ``seed XOR splitmix64(i)``. Writes ``images/`` and ``masks/`` under
    ``out_dir`` and returns a manifest rooted there holding the originals
    (label normal, when ``include_normals``) followed by the generated images.
    """
    rules = list(rules)
    if not rules:
        raise UsageError("at least one rule is required")
    for r in rules:
        if r not in RULES:
            raise UsageError(f"unknown rule {r!r}; expected one of {RULES}")
    if palette_mode not in PALETTE_MODES:
        raise UsageError(f"unknown palette mode {palette_mode!r}")
    out_dir = Path(out_dir)
    generator = "rule_F" if palette_mode == "fixed_palette" else "rule_R"
    normals = [r for r in normal_manifest.records if r.label == "normal"]
    rebased = normal_manifest.subset(normals).rebased(out_dir)
    generated = []
    for i, rec in enumerate(normals):
        rule = rules[i % len(rules)]
        s = item_seed(seed, i)
        src_path = normal_manifest.resolve(rec.image_path)
        image, mask = apply_rule(read_image(src_path), RuleSpec(rule, palette_mode, s, constraints))
        stem = f"{generator}_{i:05d}_{rule}"
        write_image(out_dir / "images" / f"{stem}.png", image)
        write_mask(out_dir / "masks" / f"{stem}.png", mask)
        generated.append(Record(
            image_path=f"images/{stem}.png",
            label="glitch",
            glitch_class=GLITCH_CLASS[rule],
            mask_path=f"masks/{stem}.png",
            generator=generator,
            seed=s,
            meta={"rule": rule, "palette_mode": palette_mode, "source": rebased.records[i].image_path,
                  "run_seed": int(seed)},
        ))
    log.info("generated %d rule-based glitch images from %d normals", len(generated), len(normals))
    records = (list(rebased.records) if include_normals else []) + generated
    return DatasetManifest(records, out_dir)
