"""Declarative scene, camera and fault descriptions, with JSON loading.

Scene JSON schema (all coordinates in pixels, colors as ``[r, g, b]``)::

    {
      "name": "menu",                       optional
      "width": 128, "height": 64,
      "frame_count": 6,
      "seed": 7,
      "layers": [                           back to front
        {"name": "world", "drawables": [
          {"kind": "rect", "x": 0, "y": 40, "w": 128, "h": 24, "color": [60, 120, 60]},
          {"kind": "gradient", "x": 0, "y": 0, "w": 128, "h": 20,
           "color": [..], "color2": [..], "direction": "vertical"},
          {"kind": "sprite", "x": 10, "y": 8, "w": 16, "h": 16,
           "texture": {"pattern": "noise", "colors": [[..], [..]], "scale": 4, "seed": 3},
           "velocity": [6, 0]}
        ]}
      ],
      "cameras": [                          composited in order into one framebuffer
        {"enabled": true, "clear_flag": "SkyBox", "clear_color": [0, 0, 0],
         "sky": [[110, 160, 230], [200, 225, 250]],   gradient, or "sky_texture": {..}
         "layer_mask": [0], "viewport": [0, 0, 128, 64],
         "post_effects": [{"effect": "overexpose", "gain": 1.5}]}
      ]
    }

Sprite textures use ``pattern`` ``noise`` (seeded value noise blended between
two colors), ``checker``, ``stripes``, or explicit ``pixels`` (rows of RGB
triples). Any drawable may carry ``velocity`` ``[dx, dy]`` in pixels per
frame.

Fault JSON::

    {"fault": "camera_disabled", "target_camera": 0, "onset_frame": 3, "texture_mode": "blocks"}
    {"fault": "clearflag_override", "target_camera": 0, "onset_frame": 2, "clear_flag": "Nothing"}
    {"fault": "stale_post_effect", "target_camera": 1, "onset_frame": 0, "effect": {"effect": "mirror_vertical"}}

A scene file may carry a ``"faults"`` list alongside the scene fields.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ImageIOError, UsageError

CLEAR_FLAGS = ("SkyBox", "SolidColor", "DepthOnly", "Nothing")
EFFECTS = ("mirror_vertical", "mirror_horizontal", "overexpose", "letterbox")
DRAWABLE_KINDS = ("rect", "gradient", "sprite")
PATTERNS = ("noise", "checker", "stripes")
FAULTS = ("camera_disabled", "clearflag_override", "stale_post_effect")
TEXTURE_MODES = ("blocks", "noise")
DEFAULT_SKY = ((110, 160, 230), (200, 225, 250))


class SpecError(UsageError):
    """A scene or fault description failed validation; ``where`` names the offending field."""

    def __init__(self, where, msg):
        self.where = where
        super().__init__(f"{where}: {msg}" if where else msg)


def _color(v, where):
    if not (isinstance(v, (list, tuple)) and len(v) == 3 and all(isinstance(c, int) and 0 <= c <= 255 for c in v)):
        raise SpecError(where, f"expected [r, g, b] with integers in 0..255, got {v!r}")
    return tuple(int(c) for c in v)


def _int(v, where, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(where, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise SpecError(where, f"must be >= {lo}, got {v}")
    return v


def _choice(v, options, where):
    if v not in options:
        raise SpecError(where, f"expected one of {list(options)}, got {v!r}")
    return v


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise SpecError(where, f"expected an object, got {type(d).__name__}")
    unknown = set(d) - set(allowed)
    if unknown:
        raise SpecError(where, f"unknown field(s) {sorted(unknown)}")


@dataclass(frozen=True)
class PostEffect:
    effect: str
    gain: float = 1.0
    size: int = 0

    @classmethod
    def from_dict(cls, d, where="effect"):
        if isinstance(d, str):
            d = {"effect": d}
        _check_keys(d, ("effect", "gain", "size"), where)
        effect = _choice(d.get("effect"), EFFECTS, f"{where}.effect")
        gain = d.get("gain", 1.0)
        if effect == "overexpose":
            if not isinstance(gain, (int, float)) or isinstance(gain, bool) or gain <= 0:
                raise SpecError(f"{where}.gain", f"must be a number > 0, got {gain!r}")
        size = _int(d.get("size", 0), f"{where}.size", lo=0)
        if effect == "letterbox" and size < 1:
            raise SpecError(f"{where}.size", "letterbox needs size >= 1")
        return cls(effect, float(gain), size)

    def to_dict(self):
        d = {"effect": self.effect}
        if self.effect == "overexpose":
            d["gain"] = self.gain
        if self.effect == "letterbox":
            d["size"] = self.size
        return d


@dataclass(frozen=True)
class Texture:
    pattern: str = "noise"
    colors: tuple = ((0, 0, 0), (255, 255, 255))
    scale: int = 4
    seed: int = 0
    pixels: tuple = None

    @classmethod
    def from_dict(cls, d, where="texture"):
        _check_keys(d, ("pattern", "colors", "scale", "seed", "pixels"), where)
        if "pixels" in d:
            rows = d["pixels"]
            if not isinstance(rows, list) or not rows or not all(isinstance(r, list) and r for r in rows):
                raise SpecError(f"{where}.pixels", "expected a non-empty list of rows of [r, g, b]")
            width = len(rows[0])
            out = []
            for i, row in enumerate(rows):
                if len(row) != width:
                    raise SpecError(f"{where}.pixels[{i}]", f"row length {len(row)} != {width}")
                out.append(tuple(_color(c, f"{where}.pixels[{i}][{j}]") for j, c in enumerate(row)))
            return cls(pattern="pixels", pixels=tuple(out))
        pattern = _choice(d.get("pattern", "noise"), PATTERNS, f"{where}.pattern")
        colors = d.get("colors", [[0, 0, 0], [255, 255, 255]])
        if not isinstance(colors, list) or len(colors) != 2:
            raise SpecError(f"{where}.colors", "expected two colors")
        colors = tuple(_color(c, f"{where}.colors[{i}]") for i, c in enumerate(colors))
        return cls(pattern, colors, _int(d.get("scale", 4), f"{where}.scale", lo=1), _int(d.get("seed", 0), f"{where}.seed"))

    def to_dict(self):
        if self.pattern == "pixels":
            return {"pixels": [[list(c) for c in row] for row in self.pixels]}
        return {"pattern": self.pattern, "colors": [list(c) for c in self.colors], "scale": self.scale, "seed": self.seed}


@dataclass(frozen=True)
class DrawableSpec:
    kind: str
    x: int
    y: int
    w: int
    h: int
    color: tuple = (255, 255, 255)
    color2: tuple = (0, 0, 0)
    direction: str = "vertical"
    texture: Texture = None
    velocity: tuple = (0, 0)

    @classmethod
    def from_dict(cls, d, where="drawable"):
        _check_keys(d, ("kind", "x", "y", "w", "h", "color", "color2", "direction", "texture", "velocity"), where)
        kind = _choice(d.get("kind"), DRAWABLE_KINDS, f"{where}.kind")
        for k in ("x", "y", "w", "h"):
            if k not in d:
                raise SpecError(f"{where}.{k}", "missing")
        vel = d.get("velocity", [0, 0])
        if not (isinstance(vel, list) and len(vel) == 2):
            raise SpecError(f"{where}.velocity", f"expected [dx, dy], got {vel!r}")
        texture = None
        if kind == "sprite":
            if "texture" not in d:
                raise SpecError(f"{where}.texture", "sprites need a texture")
            texture = Texture.from_dict(d["texture"], f"{where}.texture")
        return cls(
            kind,
            _int(d["x"], f"{where}.x"),
            _int(d["y"], f"{where}.y"),
            _int(d["w"], f"{where}.w", lo=1),
            _int(d["h"], f"{where}.h", lo=1),
            _color(d.get("color", [255, 255, 255]), f"{where}.color"),
            _color(d.get("color2", [0, 0, 0]), f"{where}.color2"),
            _choice(d.get("direction", "vertical"), ("vertical", "horizontal"), f"{where}.direction"),
            texture,
            (_int(vel[0], f"{where}.velocity[0]"), _int(vel[1], f"{where}.velocity[1]")),
        )

    def to_dict(self):
        d = {"kind": self.kind, "x": self.x, "y": self.y, "w": self.w, "h": self.h}
        if self.kind == "sprite":
            d["texture"] = self.texture.to_dict()
        else:
            d["color"] = list(self.color)
        if self.kind == "gradient":
            d["color2"] = list(self.color2)
            d["direction"] = self.direction
        if self.velocity != (0, 0):
            d["velocity"] = list(self.velocity)
        return d


@dataclass(frozen=True)
class LayerSpec:
    name: str
    drawables: tuple = ()

    @classmethod
    def from_dict(cls, d, where="layer"):
        _check_keys(d, ("name", "drawables"), where)
        items = d.get("drawables", [])
        if not isinstance(items, list):
            raise SpecError(f"{where}.drawables", "expected a list")
        return cls(str(d.get("name", "")),
                   tuple(DrawableSpec.from_dict(x, f"{where}.drawables[{i}]") for i, x in enumerate(items)))

    def to_dict(self):
        return {"name": self.name, "drawables": [x.to_dict() for x in self.drawables]}


@dataclass(frozen=True)
class CameraSpec:
    enabled: bool = True
    clear_flag: str = "SkyBox"
    clear_color: tuple = (0, 0, 0)
    layer_mask: tuple = (0,)
    post_effects: tuple = ()
    viewport: tuple = None  # (x, y, w, h); None = whole canvas
    sky: tuple = DEFAULT_SKY
    sky_texture: Texture = None  # SkyBox draws this instead of the gradient when set

    @classmethod
    def from_dict(cls, d, where="camera"):
        _check_keys(d, ("enabled", "clear_flag", "clear_color", "layer_mask", "post_effects", "viewport", "sky",
                         "sky_texture"), where)
        enabled = d.get("enabled", True)
        if not isinstance(enabled, bool):
            raise SpecError(f"{where}.enabled", f"expected true/false, got {enabled!r}")
        mask = d.get("layer_mask")
        if not isinstance(mask, list) or not mask:
            raise SpecError(f"{where}.layer_mask", "expected a non-empty list of layer indices")
        effects = d.get("post_effects", [])
        if not isinstance(effects, list):
            raise SpecError(f"{where}.post_effects", "expected a list")
        vp = d.get("viewport")
        if vp is not None:
            if not (isinstance(vp, list) and len(vp) == 4):
                raise SpecError(f"{where}.viewport", f"expected [x, y, w, h], got {vp!r}")
            vp = tuple(_int(v, f"{where}.viewport[{i}]", lo=0) for i, v in enumerate(vp))
        sky = d.get("sky", [list(c) for c in DEFAULT_SKY])
        if not (isinstance(sky, list) and len(sky) == 2):
            raise SpecError(f"{where}.sky", "expected [top_color, bottom_color]")
        sky_tex = d.get("sky_texture")
        if sky_tex is not None:
            if not isinstance(sky_tex, dict):
                raise SpecError(f"{where}.sky_texture", "expected a texture object")
            sky_tex = Texture.from_dict(sky_tex, f"{where}.sky_texture")
        return cls(
            enabled,
            _choice(d.get("clear_flag", "SkyBox"), CLEAR_FLAGS, f"{where}.clear_flag"),
            _color(d.get("clear_color", [0, 0, 0]), f"{where}.clear_color"),
            tuple(_int(m, f"{where}.layer_mask[{i}]", lo=0) for i, m in enumerate(mask)),
            tuple(PostEffect.from_dict(e, f"{where}.post_effects[{i}]") for i, e in enumerate(effects)),
            vp,
            tuple(_color(c, f"{where}.sky[{i}]") for i, c in enumerate(sky)),
            sky_tex,
        )

    def to_dict(self):
        d = {
            "enabled": self.enabled,
            "clear_flag": self.clear_flag,
            "clear_color": list(self.clear_color),
            "layer_mask": list(self.layer_mask),
            "post_effects": [e.to_dict() for e in self.post_effects],
            "sky": [list(c) for c in self.sky],
        }
        if self.viewport is not None:
            d["viewport"] = list(self.viewport)
        if self.sky_texture is not None:
            d["sky_texture"] = self.sky_texture.to_dict()
        return d


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    layers: tuple
    cameras: tuple
    frame_count: int = 1
    seed: int = 0
    name: str = "scene"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise SpecError("width/height", "canvas must be at least 1x1")
        if self.frame_count < 1:
            raise SpecError("frame_count", f"must be >= 1, got {self.frame_count}")
        if not self.cameras:
            raise SpecError("cameras", "at least one camera is required")
        for ci, cam in enumerate(self.cameras):
            for li in cam.layer_mask:
                if li >= len(self.layers):
                    raise SpecError(f"cameras[{ci}].layer_mask", f"layer index {li} out of range ({len(self.layers)} layers)")
            if cam.viewport is not None:
                x, y, w, h = cam.viewport
                if w < 1 or h < 1 or x + w > self.width or y + h > self.height:
                    raise SpecError(f"cameras[{ci}].viewport", f"{list(cam.viewport)} does not fit {self.width}x{self.height}")

    def viewport(self, ci):
        vp = self.cameras[ci].viewport
        return vp if vp is not None else (0, 0, self.width, self.height)

    @classmethod
    def from_dict(cls, d, where=""):
        def w(k):
            return f"{where}.{k}" if where else k

        _check_keys(d, ("name", "width", "height", "layers", "cameras", "frame_count", "seed", "faults"), where)
        for k in ("width", "height", "layers", "cameras"):
            if k not in d:
                raise SpecError(w(k), "missing")
        if not isinstance(d["layers"], list):
            raise SpecError(w("layers"), "expected a list")
        if not isinstance(d["cameras"], list):
            raise SpecError(w("cameras"), "expected a list")
        return cls(
            _int(d["width"], w("width"), lo=1),
            _int(d["height"], w("height"), lo=1),
            tuple(LayerSpec.from_dict(x, f"{w('layers')}[{i}]") for i, x in enumerate(d["layers"])),
            tuple(CameraSpec.from_dict(x, f"{w('cameras')}[{i}]") for i, x in enumerate(d["cameras"])),
            _int(d.get("frame_count", 1), w("frame_count"), lo=1),
            _int(d.get("seed", 0), w("seed")),
            str(d.get("name", "scene")),
        )

    def to_dict(self):
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "frame_count": self.frame_count,
            "seed": self.seed,
            "layers": [x.to_dict() for x in self.layers],
            "cameras": [c.to_dict() for c in self.cameras],
        }


@dataclass(frozen=True)
class FaultSpec:
    fault: str
    target_camera: int = 0
    onset_frame: int = 0
    clear_flag: str = "Nothing"
    effect: PostEffect = PostEffect("mirror_vertical")
    texture_mode: str = "blocks"

    @classmethod
    def from_dict(cls, d, where="fault"):
        _check_keys(d, ("fault", "target_camera", "onset_frame", "clear_flag", "effect", "texture_mode"), where)
        return cls(
            _choice(d.get("fault"), FAULTS, f"{where}.fault"),
            _int(d.get("target_camera", 0), f"{where}.target_camera", lo=0),
            _int(d.get("onset_frame", 0), f"{where}.onset_frame", lo=0),
            _choice(d.get("clear_flag", "Nothing"), CLEAR_FLAGS, f"{where}.clear_flag"),
            PostEffect.from_dict(d.get("effect", {"effect": "mirror_vertical"}), f"{where}.effect"),
            _choice(d.get("texture_mode", "blocks"), TEXTURE_MODES, f"{where}.texture_mode"),
        )

    def validate_for(self, scene):
        if self.target_camera >= len(scene.cameras):
            raise SpecError("fault.target_camera", f"camera {self.target_camera} does not exist ({len(scene.cameras)} cameras)")
        if self.onset_frame >= scene.frame_count:
            raise SpecError("fault.onset_frame", f"onset {self.onset_frame} is past the last frame ({scene.frame_count - 1})")

    def to_dict(self):
        d = {"fault": self.fault, "target_camera": self.target_camera, "onset_frame": self.onset_frame}
        if self.fault == "clearflag_override":
            d["clear_flag"] = self.clear_flag
        elif self.fault == "stale_post_effect":
            d["effect"] = self.effect.to_dict()
        else:
            d["texture_mode"] = self.texture_mode
        return d


@dataclass
class SceneFile:
    path: Path
    scene: SceneSpec
    faults: list = field(default_factory=list)


def load_scene_file(path):
    """Parse a scene JSON file (with optional ``faults``); errors carry the line or field path."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ImageIOError(path, f"cannot read scene ({exc})") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    try:
        scene = SceneSpec.from_dict(d)
        faults_raw = d.get("faults", [])
        if not isinstance(faults_raw, list):
            raise SpecError("faults", "expected a list")
        faults = [FaultSpec.from_dict(f, f"faults[{i}]") for i, f in enumerate(faults_raw)]
        for i, f in enumerate(faults):
            try:
                f.validate_for(scene)
            except SpecError as exc:
                raise SpecError(f"faults[{i}]", str(exc)) from None
    except SpecError as exc:
        raise SpecError(f"{path}", str(exc)) from None
    return SceneFile(path, scene, faults)


def load_scene_dir(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageIOError(directory, "not a directory")
    files = sorted(directory.glob("*.json"))
    if not files:
        raise ImageIOError(directory, "no scene *.json files found")
    return [load_scene_file(p) for p in files]


def save_scene_file(path, scene, faults=()):
    d = scene.to_dict()
    if faults:
        d["faults"] = [f.to_dict() for f in faults]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(d, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ImageIOError(path, f"cannot write scene ({exc})") from exc
    return path
