"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"GLIB"                      magic, 4 bytes
    u32 format_version           currently 1
    u32 n, n bytes               UTF-8 JSON of the ModelConfig
    repeated until EOF:
        u16 n, n bytes           tensor name (UTF-8)
        u8 ndim
        u32 * ndim               dims
        f32 * prod(dims)         row-major data

Tensors are written in the model's parameter order, so identical weights
always produce identical bytes.
"""

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    ArchitectureMismatchError,
    CheckpointError,
    CheckpointVersionError,
    ImageIOError,
    NotACheckpointError,
    TruncatedCheckpointError,
    UsageError,
)
from .config import ModelConfig
from .model import GlitchNet

MAGIC = b"GLIB"
FORMAT_VERSION = 1


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_model(cls, model):
        return cls(model.config, model.state_arrays())

    def to_model(self):
        model = GlitchNet(self.config)
        try:
            model.load_arrays(self.tensors)
        except Exception as exc:
            raise ArchitectureMismatchError(f"checkpoint does not fit its architecture: {exc}") from None
        return model


def encode_checkpoint(ckpt):
    parts = [MAGIC, struct.pack("<I", ckpt.format_version)]
    cfg = json.dumps(ckpt.config.to_dict(), sort_keys=True).encode("utf-8")
    parts += [struct.pack("<I", len(cfg)), cfg]
    for name, arr in ckpt.tensors.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        parts += [struct.pack("<H", len(raw)), raw, struct.pack("<B", arr.ndim)]
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise TruncatedCheckpointError(f"truncated checkpoint: file ends inside {what}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def done(self):
        return self.pos >= len(self.buf)


def decode_checkpoint(buf):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise NotACheckpointError("not a checkpoint: bad magic bytes")
    r = _Reader(buf)
    r.take(4, "magic")
    (version,) = r.unpack("<I", "format version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    (n,) = r.unpack("<I", "config length")
    try:
        config = ModelConfig.from_dict(json.loads(r.take(n, "config block").decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, UsageError) as exc:
        raise CheckpointError(f"corrupt checkpoint config: {exc}") from None

    tensors = OrderedDict()
    while not r.done:
        (n,) = r.unpack("<H", "tensor name length")
        name = r.take(n, "tensor name").decode("utf-8", errors="replace")
        (ndim,) = r.unpack("<B", f"{name} rank")
        dims = r.unpack(f"<{ndim}I", f"{name} dims")
        count = int(np.prod(dims, dtype=np.int64))
        data = np.frombuffer(r.take(4 * count, f"{name} data"), dtype="<f4").reshape(dims)
        if name in tensors:
            raise CheckpointError(f"corrupt checkpoint: tensor {name!r} appears twice")
        tensors[name] = data.astype(np.float32)

    ckpt = ModelCheckpoint(config, tensors, version)
    expected = GlitchNet(config).tensors
    missing = [k for k in expected if k not in tensors]
    if missing and list(tensors) == list(expected)[:len(tensors)]:
        # a clean cut at a record boundary still loses the tail
        raise TruncatedCheckpointError(f"truncated checkpoint: tensors from {missing[0]!r} on are missing")
    extra = [k for k in tensors if k not in expected]
    if missing or extra:
        raise ArchitectureMismatchError(f"checkpoint tensors do not match architecture: missing {missing}, extra {extra}")
    for name, t in expected.items():
        if tensors[name].shape != t.shape:
            raise ArchitectureMismatchError(
                f"{name}: checkpoint shape {list(tensors[name].shape)} vs architecture {list(t.shape)}"
            )
    return ckpt


def save_checkpoint(path, ckpt):
    if isinstance(ckpt, GlitchNet):
        ckpt = ModelCheckpoint.from_model(ckpt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(ckpt))
    except OSError as exc:
        raise ImageIOError(path, f"cannot write checkpoint ({exc})") from exc
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ImageIOError(path, f"cannot read checkpoint ({exc})") from exc
    return decode_checkpoint(buf)


def load_model(path):
    return load_checkpoint(path).to_model()
