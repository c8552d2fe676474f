"""Seeded property checks shared by the hypothesis suites and the acceptance run.

Each ``check_*`` takes an integer seed, builds its own inputs, and raises
``AssertionError`` on violation.
"""

import numpy as np
from oracles import mirror_vertical_reference

from glitchkit.augment_rules import (
    FIXED_PALETTE,
    RULES,
    RegionConstraints,
    RuleSpec,
    apply_rule,
    plan_mosaic,
    plan_partial_repetition,
    plan_random_noise,
    plan_solid_color_blocks,
)
from glitchkit.imaging import ImageRGB
from glitchkit.rendersim import (
    CameraSpec,
    DrawableSpec,
    FaultSpec,
    LayerSpec,
    PostEffect,
    SceneSpec,
    apply_post_effect,
    fault_cycle,
    random_fault,
    random_scene,
    render_scene,
    render_with_fault,
)

PALETTE = {tuple(c) for c in FIXED_PALETTE.values()}


def _image(seed):
    rng = np.random.default_rng(seed)
    w, h = int(rng.integers(16, 97)), int(rng.integers(12, 65))
    return ImageRGB(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def _constraints(seed):
    rng = np.random.default_rng([seed, 1])
    lo = float(rng.uniform(0.02, 0.1))
    return RegionConstraints(lo, float(rng.uniform(lo + 0.02, 0.3)))


# augment_rules

def check_rule_locality_and_determinism(seed):
    img = _image(seed)
    c = _constraints(seed)
    for rule in RULES:
        for mode in ("random_rgb", "fixed_palette"):
            spec = RuleSpec(rule, mode, seed, c)
            out, mask = apply_rule(img, spec)
            again, mask2 = apply_rule(img, spec)
            assert out.pixels.tobytes() == again.pixels.tobytes() and mask == mask2, (rule, "determinism")
            assert mask.area > 0, (rule, "empty mask")
            keep = ~mask.values
            assert np.array_equal(out.pixels[keep], img.pixels[keep]), (rule, "locality")


def check_rule_palette_soundness(seed):
    img = _image(seed)
    out, mask = apply_rule(img, RuleSpec("solid_color_block", "fixed_palette", seed, _constraints(seed)))
    colors = {tuple(int(v) for v in p) for p in out.pixels[mask.values]}
    assert colors <= PALETTE, colors - PALETTE


def check_rule_mask_constraints(seed):
    img = _image(seed)
    c = _constraints(seed)
    w, h, total = img.width, img.height, img.width * img.height

    def within(rect):
        return c.min_frac * total <= rect.area <= c.max_frac * total

    rect = plan_random_noise(w, h, seed, c)
    _, mask = apply_rule(img, RuleSpec("random_noise", seed=seed, constraints=c))
    assert within(rect) and mask.area == rect.area

    rect, patch = plan_mosaic(w, h, seed, c)
    _, mask = apply_rule(img, RuleSpec("mosaic", seed=seed, constraints=c))
    assert within(rect) and mask.area == rect.area and 2 <= patch <= 32

    blocks = plan_solid_color_blocks(w, h, seed, "random_rgb", c)
    _, mask = apply_rule(img, RuleSpec("solid_color_block", seed=seed, constraints=c))
    union = np.zeros((h, w), bool)
    for r, _ in blocks:
        assert within(r)
        union[r.slices] = True
    assert 3 <= len(blocks) <= 5 and np.array_equal(mask.values, union)

    rect, axis = plan_partial_repetition(w, h, seed, c)
    _, mask = apply_rule(img, RuleSpec("partial_repetition", seed=seed, constraints=c))
    assert within(rect)
    band = np.zeros((h, w), bool)
    if axis == "horizontal":
        band[rect.y:rect.y + rect.h, :] = True
    else:
        band[:, rect.x:rect.x + rect.w] = True
    band[rect.slices] = False
    assert np.array_equal(mask.values, band)


# rendersim

def check_injection_mask_correctness(seed):
    scene = random_scene(seed, 64, 32, frame_count=3)
    for kind in fault_cycle(3, offset=seed % 3):
        fault = random_fault(seed, scene, kind)
        frames, masks, _ = render_with_fault(scene, fault)
        clean = render_scene(scene)
        for t, (f, c, m) in enumerate(zip(frames, clean, masks)):
            diff = np.any(f.pixels != c.pixels, axis=2)
            assert np.array_equal(m.values, diff), (kind, t)
            if t < fault.onset_frame:
                assert not m.area and f == c


def _moving_scene(seed, clear_flag):
    rng = np.random.default_rng([seed, 7])
    w, h = int(rng.integers(24, 64)), int(rng.integers(16, 40))
    sw, sh = int(rng.integers(2, 7)), int(rng.integers(2, 7))
    x0, y0 = int(rng.integers(0, w // 2)), int(rng.integers(0, h - sh))
    vx, vy = int(rng.integers(1, 6)), int(rng.integers(-1, 2))
    color = tuple(int(v) for v in rng.integers(1, 256, 3))
    layer = LayerSpec("world", (DrawableSpec("rect", x0, y0, sw, sh, color=color, velocity=(vx, vy)),))
    cam = CameraSpec(clear_flag=clear_flag, clear_color=(0, 0, 0), layer_mask=(0,))
    frames = int(rng.integers(2, 6))
    return SceneSpec(w, h, (layer,), (cam,), frame_count=frames, seed=seed), (x0, y0, sw, sh, vx, vy, color)


def _imprint(w, h, x, y, sw, sh):
    m = np.zeros((h, w), bool)
    m[max(y, 0):max(min(y + sh, h), 0), max(x, 0):max(min(x + sw, w), 0)] = True
    return m


def check_clearflag_semantics(seed):
    # SolidColor: each frame depends only on the current sprite position
    solid, (x0, y0, sw, sh, vx, vy, color) = _moving_scene(seed, "SolidColor")
    frames = render_scene(solid)
    for t, f in enumerate(frames):
        expect = np.zeros((solid.height, solid.width, 3), np.uint8)
        expect[_imprint(solid.width, solid.height, x0 + vx * t, y0 + vy * t, sw, sh)] = color
        assert np.array_equal(f.pixels, expect), ("SolidColor", t)
    # Nothing: every earlier imprint persists where the current frame draws nothing
    fault = FaultSpec("clearflag_override", 0, 0, clear_flag="Nothing")
    over, _, cls = render_with_fault(solid, fault)
    assert cls == "frame_overlay"
    for t in range(1, len(over)):
        drawn = _imprint(solid.width, solid.height, x0 + vx * t, y0 + vy * t, sw, sh)
        assert np.array_equal(over[t].pixels[~drawn], over[t - 1].pixels[~drawn]), ("Nothing", t)
        trail = np.zeros_like(drawn)
        for k in range(t + 1):
            trail |= _imprint(solid.width, solid.height, x0 + vx * k, y0 + vy * k, sw, sh)
        assert np.all(over[t].pixels[trail] == color) and not over[t].pixels[~trail].any(), ("trail", t)


def check_mirror_involution(seed):
    scene = random_scene(seed, 64, 32, frame_count=2)
    frame = render_scene(scene)[-1].pixels
    mv = PostEffect("mirror_vertical")
    once = apply_post_effect(frame, mv)
    assert np.array_equal(once, mirror_vertical_reference(frame))
    assert np.array_equal(apply_post_effect(once, mv), frame)
    mh = PostEffect("mirror_horizontal")
    assert np.array_equal(apply_post_effect(apply_post_effect(frame, mh), mh), frame)
    # a stale vertical mirror on a single full-canvas camera flips the clean frame
    single = SceneSpec(scene.width, scene.height, scene.layers, (scene.cameras[0],), scene.frame_count,
                       scene.seed)
    clean = render_scene(single)
    faulted, _, cls = render_with_fault(single, FaultSpec("stale_post_effect", 0, 0, effect=mv))
    assert cls == "partial_repetition"
    for c, f in zip(clean, faulted):
        assert np.array_equal(f.pixels, c.pixels[::-1])


AUGMENT_CHECKS = (check_rule_locality_and_determinism, check_rule_palette_soundness, check_rule_mask_constraints)
RENDER_CHECKS = (check_injection_mask_correctness, check_clearflag_semantics, check_mirror_involution)
