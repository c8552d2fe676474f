"""Seeded generator of synthetic game-UI scenes and matching faults.

Scenes of one game share a ``GameStyle`` (palette, texture pool, HUD
placement). Each scene has a world camera (SkyBox clear, cloudy sky) drawing a
ground strip, textured props and at least one moving sprite, and a HUD
camera (DepthOnly) whose viewport is a panel along one edge of the screen.
"""

import colorsys

import numpy as np

from ..seeding import derive_rng
from .scene import CameraSpec, DrawableSpec, FaultSpec, LayerSpec, PostEffect, SceneSpec, Texture

FAULT_KINDS = ("camera_disabled", "clearflag_override", "stale_post_effect")
# texture feature sizes in pixels; fine detail everywhere, as in a downscaled screenshot
TEXTURE_SCALE = (1, 3)
SKY_SCALE = (1, 3)


class _Palette:
    """Scene colors share a base hue (or its complement) at moderate saturation,
    like a game's art direction; glitch colors are unconstrained."""

    def __init__(self, rng):
        self.rng = rng
        self.hue = rng.random()

    def color(self, value=(0.25, 0.95), sat=(0.15, 0.55)):
        rng = self.rng
        hue = self.hue + rng.uniform(-0.08, 0.08) + (0.5 if rng.random() < 0.3 else 0.0)
        r, g, b = colorsys.hsv_to_rgb(hue % 1.0, rng.uniform(*sat), rng.uniform(*value))
        return (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))

    def texture(self, light=False):
        rng = self.rng
        # mostly smooth noise: flat patches would read like mosaic or block glitches
        pattern = ("noise", "noise", "noise", "stripes")[int(rng.integers(4))]
        if light:
            colors = (self.color((0.75, 1.0), (0.05, 0.25)), self.color((0.6, 0.85), (0.05, 0.3)))
        else:
            colors = (self.color((0.2, 0.5)), self.color((0.55, 0.9)))
        return Texture(pattern, colors, int(rng.integers(*TEXTURE_SCALE)), int(rng.integers(0, 2**31)))


LEVELS_PER_GAME = 3


def _backdrop(rng, st, width, height):
    """(ground_y, drawables) for one level: ground strip plus a skyline of props."""
    ground_y = int(rng.integers(height * 5 // 8, height * 7 // 8))
    world = [
        DrawableSpec("gradient", 0, ground_y, width, height - ground_y,
                     color=st.ground[0], color2=st.ground[1], direction="vertical"),
        DrawableSpec("sprite", 0, ground_y + 1, width, max(1, (height - ground_y) // 3), texture=st.ground_texture),
    ]
    x = int(rng.integers(-width // 10, width // 10))
    while x < width:
        w, h = int(rng.integers(width // 10, width // 4)), int(rng.integers(height // 6, height // 2))
        if rng.random() < 0.6:
            world.append(DrawableSpec("sprite", x, ground_y - h, w, h, texture=_pick(rng, st.props)))
        x += w + int(rng.integers(0, width // 6))
    return ground_y, tuple(world)


class GameStyle:
    """Art assets shared by every scene of one synthetic game: palette,
    texture pools, HUD panel and a few level backdrops."""

    def __init__(self, seed, width, height, levels=LEVELS_PER_GAME):
        rng = derive_rng(seed, "procedural", "style")
        pal = _Palette(rng)
        self.sky = (pal.color((0.45, 0.8)), pal.color((0.75, 1.0), (0.05, 0.3)))
        self.sky_texture = Texture("noise", self.sky, int(rng.integers(*SKY_SCALE)), int(rng.integers(0, 2**31)))
        self.clear_color = pal.color((0.5, 0.9))
        self.ground = (pal.color((0.35, 0.6)), pal.color((0.15, 0.35)))
        self.ground_texture = pal.texture()
        self.props = [pal.texture() for _ in range(6)]
        self.clouds = [pal.texture(light=True) for _ in range(3)]
        self.actors = [pal.texture() for _ in range(4)]
        self.panel = (pal.color((0.25, 0.45)), pal.color((0.1, 0.25)))
        self.hud_bars = [(pal.color((0.6, 1.0), (0.2, 0.6)), pal.color((0.3, 0.6), (0.2, 0.6))) for _ in range(3)]
        self.side = ("bottom", "top", "left", "right")[int(rng.integers(4))]
        if self.side in ("bottom", "top"):
            ph = int(rng.integers(height // 6, height // 4 + 1))
            self.viewport = (0, height - ph if self.side == "bottom" else 0, width, ph)
        else:
            pw = int(rng.integers(width // 8, width // 5 + 1))
            self.viewport = (width - pw if self.side == "right" else 0, 0, pw, height)
        self.levels = [_backdrop(rng, self, width, height) for _ in range(levels)]


def _pick(rng, pool):
    return pool[int(rng.integers(len(pool)))]


def random_scene(seed, width=128, height=64, frame_count=4, name=None, style=None):
    """A scene laid out from ``seed`` using the assets of game ``style`` (default: its own)."""
    rng = derive_rng(seed, "procedural", "scene")
    st = GameStyle(seed if style is None else style, width, height)
    ground_y, backdrop = _pick(rng, st.levels)
    world = list(backdrop)
    for _ in range(int(rng.integers(1, 4))):
        w, h = int(rng.integers(width // 10, width // 5)), int(rng.integers(height // 10, height // 6))
        world.append(DrawableSpec("sprite", int(rng.integers(0, width - w)), int(rng.integers(0, ground_y // 2)),
                                  w, h, texture=_pick(rng, st.clouds)))

    actors = []
    for k in range(int(rng.integers(2, 4))):
        s = int(rng.integers(max(6, height // 5), max(7, height // 3)))
        y = int(rng.integers(2, max(3, ground_y - s)))
        speed = int(rng.integers(6, 15)) * (1 if rng.random() < 0.5 else -1)
        # the first actor always moves so a missing clear leaves a visible trail
        vel = (speed, int(rng.integers(-2, 3))) if k == 0 or rng.random() < 0.5 else (0, 0)
        if vel[0] < 0:
            x = int(rng.integers(width // 2, width - s))
        elif vel[0] > 0:
            x = int(rng.integers(0, width // 2 - s // 2))
        else:
            x = int(rng.integers(0, width - s))
        actors.append(DrawableSpec("sprite", x, y, s, s, texture=_pick(rng, st.actors), velocity=vel))

    vx, vy, vw, vh = vp = st.viewport
    across = vw >= vh
    hud = [DrawableSpec("gradient", vx, vy, vw, vh, color=st.panel[0], color2=st.panel[1],
                        direction="vertical" if across else "horizontal")]
    for _ in range(int(rng.integers(2, 5))):
        # gauges (gradient bars) and icons (textured sprites)
        bw = int(rng.integers(max(3, vw // 6), max(4, vw // 2)))
        bh = int(rng.integers(max(3, vh // 4), max(4, vh * 3 // 4)))
        bx = vx + int(rng.integers(0, max(1, vw - bw)))
        by = vy + int(rng.integers(0, max(1, vh - bh)))
        if rng.random() < 0.6:
            c0, c1 = _pick(rng, st.hud_bars)
            hud.append(DrawableSpec("gradient", bx, by, bw, bh, color=c0, color2=c1,
                                    direction="horizontal" if bw >= bh else "vertical"))
        else:
            hud.append(DrawableSpec("sprite", bx, by, bw, bh, texture=_pick(rng, st.actors)))

    world_cam = CameraSpec(clear_flag="SkyBox", clear_color=st.clear_color, layer_mask=(0, 1), sky=st.sky,
                           sky_texture=st.sky_texture)
    hud_cam = CameraSpec(clear_flag="DepthOnly", layer_mask=(2,), viewport=vp)
    return SceneSpec(
        width, height,
        (LayerSpec("world", tuple(world)), LayerSpec("actors", tuple(actors)), LayerSpec("hud", tuple(hud))),
        (world_cam, hud_cam),
        frame_count=frame_count,
        seed=int(seed),
        name=name or f"scene_{int(seed) % 10**8:08d}",
    )


def random_fault(seed, scene, kind, onset_frame=None):
    """A fault of ``kind`` suited to ``scene`` (targets and parameters drawn from ``seed``)."""
    rng = derive_rng(seed, "procedural", "fault", kind)
    onset = scene.frame_count - 1 if onset_frame is None else onset_frame
    if kind == "camera_disabled":
        return FaultSpec(kind, int(rng.integers(len(scene.cameras))), onset,
                         texture_mode=("blocks", "noise")[int(rng.integers(2))])
    if kind == "clearflag_override":
        # the world camera is the one that clears color; overriding the HUD's DepthOnly changes nothing
        onset = min(max(onset, 1), scene.frame_count - 1)
        return FaultSpec(kind, 0, onset, clear_flag=("Nothing", "DepthOnly")[int(rng.integers(2))])
    # a left-right flip of a world view still looks like a plausible frame, so flip the world
    # upside down; the HUD panel gets either flip
    target = 0 if rng.random() < 0.75 else 1
    effect = "mirror_vertical" if target == 0 else ("mirror_vertical", "mirror_horizontal")[int(rng.integers(2))]
    return FaultSpec(kind, target, onset, effect=PostEffect(effect))


def fault_cycle(n, offset=0):
    return [FAULT_KINDS[(i + offset) % len(FAULT_KINDS)] for i in range(n)]


def scene_seeds(seed, count, stream="scenes"):
    rng = derive_rng(seed, "procedural", stream)
    return [int(s) for s in rng.integers(0, 2**62, size=count, dtype=np.int64)]
