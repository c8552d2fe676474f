"""Deterministic software compositor and render-pipeline fault injection.

All cameras render into one persistent framebuffer, in camera order. Per
frame, each enabled camera clears its viewport according to its clear flag,
draws its layers back to front (painter's algorithm; layer order is depth),
then applies its post effects to its viewport. ``DepthOnly`` and ``Nothing``
leave the color buffer alone, so whatever the previous camera or the
previous frame left there shows through. The framebuffer starts black.
"""

from dataclasses import replace
from functools import lru_cache

import numpy as np

from ..imaging import GlitchMask, ImageRGB
from ..seeding import derive_rng
from .scene import FaultSpec, SpecError

UNINIT_BLOCK = (8, 64)


@lru_cache(maxsize=256)
def _value_noise(w, h, scale, seed):
    """Bilinearly interpolated lattice noise in [0, 1], shape (h, w)."""
    rng = derive_rng(seed, "texture", "value_noise")
    gh, gw = h // scale + 2, w // scale + 2
    grid = rng.random((gh, gw))
    ys = np.arange(h) / scale
    xs = np.arange(w) / scale
    y0, x0 = ys.astype(int), xs.astype(int)
    fy, fx = (ys - y0)[:, None], (xs - x0)[None, :]
    fy, fx = fy * fy * (3 - 2 * fy), fx * fx * (3 - 2 * fx)
    a = grid[y0][:, x0]
    b = grid[y0][:, x0 + 1]
    c = grid[y0 + 1][:, x0]
    d = grid[y0 + 1][:, x0 + 1]
    out = (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy
    out.setflags(write=False)
    return out


def texture_pixels(tex, w, h):
    """(h, w, 3) uint8 bitmap for a sprite texture."""
    if tex.pattern == "pixels":
        src = np.asarray(tex.pixels, dtype=np.uint8)
        reps = (-(-h // src.shape[0]), -(-w // src.shape[1]), 1)
        return np.tile(src, reps)[:h, :w]
    c0 = np.asarray(tex.colors[0], dtype=np.float64)
    c1 = np.asarray(tex.colors[1], dtype=np.float64)
    if tex.pattern == "noise":
        t = _value_noise(w, h, tex.scale, tex.seed)[..., None]
    elif tex.pattern == "checker":
        yy, xx = np.mgrid[0:h, 0:w]
        t = (((yy // tex.scale) + (xx // tex.scale)) % 2).astype(np.float64)[..., None]
    else:
        yy = np.arange(h)[:, None, None] * np.ones((1, w, 1))
        t = ((yy // tex.scale) % 2).astype(np.float64)
    return np.rint(c0 * (1 - t) + c1 * t).astype(np.uint8)


def _drawable_pixels(d):
    if d.kind == "rect":
        px = np.empty((d.h, d.w, 3), dtype=np.uint8)
        px[...] = d.color
        return px
    if d.kind == "gradient":
        n = d.h if d.direction == "vertical" else d.w
        t = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
        ramp = np.rint(np.outer(1 - t, d.color) + np.outer(t, d.color2)).astype(np.uint8)
        if d.direction == "vertical":
            return np.repeat(ramp[:, None, :], d.w, axis=1)
        return np.repeat(ramp[None, :, :], d.h, axis=0)
    return texture_pixels(d.texture, d.w, d.h)


def _blit(fb, px, x, y, vp):
    vx, vy, vw, vh = vp
    x0, y0 = max(x, vx), max(y, vy)
    x1, y1 = min(x + px.shape[1], vx + vw), min(y + px.shape[0], vy + vh)
    if x0 >= x1 or y0 >= y1:
        return
    fb[y0:y1, x0:x1] = px[y0 - y:y1 - y, x0 - x:x1 - x]


def _sky(cam, h, w):
    if cam.sky_texture is not None:
        return texture_pixels(cam.sky_texture, w, h)
    t = np.linspace(0.0, 1.0, h) if h > 1 else np.zeros(1)
    ramp = np.rint(np.outer(1 - t, cam.sky[0]) + np.outer(t, cam.sky[1])).astype(np.uint8)
    return np.repeat(ramp[:, None, :], w, axis=1)


def apply_post_effect(region, effect):
    """Return a new array with ``effect`` applied to an (h, w, 3) viewport region."""
    if effect.effect == "mirror_vertical":
        return region[::-1].copy()
    if effect.effect == "mirror_horizontal":
        return region[:, ::-1].copy()
    if effect.effect == "overexpose":
        return np.clip(np.rint(region.astype(np.float64) * effect.gain), 0, 255).astype(np.uint8)
    out = region.copy()
    s = min(effect.size, region.shape[0])
    out[:s] = 0
    out[region.shape[0] - s:] = 0
    return out


def uninitialized_texture(h, w, seed, mode):
    """Stand-in for stale GPU memory: random solid blocks or per-pixel noise."""
    rng = derive_rng(seed, "uninitialized", mode)
    if mode == "noise":
        return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    bh = int(rng.integers(UNINIT_BLOCK[0], UNINIT_BLOCK[1] + 1))
    bw = int(rng.integers(UNINIT_BLOCK[0], UNINIT_BLOCK[1] + 1))
    colors = rng.integers(0, 256, size=(-(-h // bh), -(-w // bw), 3), dtype=np.uint8)
    return np.repeat(np.repeat(colors, bh, axis=0), bw, axis=1)[:h, :w]


class _Pipeline:
    def __init__(self, scene, fault=None):
        self.scene = scene
        self.fault = fault
        self.fb = np.zeros((scene.height, scene.width, 3), dtype=np.uint8)
        self.sprites = [[(_drawable_pixels(d), d) for d in layer.drawables] for layer in scene.layers]

    def camera_at(self, ci, frame):
        cam = self.scene.cameras[ci]
        f = self.fault
        if f is None or f.target_camera != ci or frame < f.onset_frame:
            return cam, False
        if f.fault == "camera_disabled":
            return cam, True
        if f.fault == "clearflag_override":
            return replace(cam, clear_flag=f.clear_flag), False
        return replace(cam, post_effects=cam.post_effects + (f.effect,)), False

    def frame(self, t):
        fb = self.fb
        for ci in range(len(self.scene.cameras)):
            cam, garbage = self.camera_at(ci, t)
            vx, vy, vw, vh = vp = self.scene.viewport(ci)
            view = (slice(vy, vy + vh), slice(vx, vx + vw))
            if garbage:
                seed = derive_rng(self.scene.seed, "fault", ci, t).integers(0, 2**63)
                fb[view] = uninitialized_texture(vh, vw, int(seed), self.fault.texture_mode)
                continue
            if not cam.enabled:
                continue
            if cam.clear_flag == "SkyBox":
                fb[view] = _sky(cam, vh, vw)
            elif cam.clear_flag == "SolidColor":
                fb[view] = cam.clear_color
            for li in sorted(cam.layer_mask):
                for px, d in self.sprites[li]:
                    _blit(fb, px, d.x + d.velocity[0] * t, d.y + d.velocity[1] * t, vp)
            for effect in cam.post_effects:
                fb[view] = apply_post_effect(fb[view], effect)
        return ImageRGB(fb.copy())


def render_scene(scene):
    """Fault-free frames, a pure function of the scene."""
    pipe = _Pipeline(scene)
    return [pipe.frame(t) for t in range(scene.frame_count)]


def glitch_class_for(fault):
    if fault.fault == "camera_disabled":
        return "abnormal_color_block" if fault.texture_mode == "blocks" else "random_noise"
    if fault.fault == "clearflag_override":
        return "frame_overlay"
    return {
        "mirror_vertical": "partial_repetition",
        "mirror_horizontal": "partial_repetition",
        "overexpose": "overexposed",
        "letterbox": "black_border",
    }[fault.effect.effect]


def diff_mask(a, b):
    return GlitchMask(np.any(a.pixels != b.pixels, axis=2))


def render_with_fault(scene, fault):
    """(frames, masks, glitch_class) with ``fault`` active from its onset frame.

    ``masks[t]`` marks the pixels where frame ``t`` differs from the
    fault-free render of the same frame; it is empty before the onset.
    """
    if not isinstance(fault, FaultSpec):
        raise SpecError("fault", f"expected a FaultSpec, got {type(fault).__name__}")
    fault.validate_for(scene)
    clean = render_scene(scene)
    pipe = _Pipeline(scene, fault)
    frames = [pipe.frame(t) for t in range(scene.frame_count)]
    masks = [diff_mask(f, c) for f, c in zip(frames, clean)]
    return frames, masks, glitch_class_for(fault)
