import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from ..errors import ImageIOError, UsageError

LABELS = ("normal", "glitch")
NORMAL, GLITCH = 0, 1


def _fraction(value):
    try:
        frac = Fraction(str(value)) if not isinstance(value, Fraction) else value
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"channel_scale must be a positive rational, got {value!r}") from None
    if frac <= 0:
        raise UsageError(f"channel_scale must be positive, got {value!r}")
    return frac


@dataclass
class ModelConfig:
    """Detector architecture.

    ``channel_scale`` shrinks every conv width and every hidden FC width
    (rounded, floor of 1); the last FC width always stays ``num_classes``.
    """

    input_width: int = 512
    input_height: int = 256
    num_classes: int = 2
    conv_channels: list = field(default_factory=lambda: [16, 16, 16, 16, 32, 32, 64, 64, 128, 128])
    pool_after: list = field(default_factory=lambda: [2, 4, 6, 8, 10])
    fc_dims: list = field(default_factory=lambda: [1024, 256, 64, 2])
    channel_scale: Fraction = Fraction(1)

    def __post_init__(self):
        self.channel_scale = _fraction(self.channel_scale)
        self.conv_channels = [int(c) for c in self.conv_channels]
        self.pool_after = [int(i) for i in self.pool_after]
        self.fc_dims = [int(d) for d in self.fc_dims]
        self.validate()

    def validate(self):
        if len(self.conv_channels) != 10:
            raise UsageError(f"conv_channels must list 10 layers, got {len(self.conv_channels)}")
        if len(self.fc_dims) != 4:
            raise UsageError(f"fc_dims must list 4 layers, got {len(self.fc_dims)}")
        if self.fc_dims[-1] != self.num_classes:
            raise UsageError(f"last fc dim {self.fc_dims[-1]} must equal num_classes {self.num_classes}")
        if any(c < 1 for c in self.conv_channels) or any(d < 1 for d in self.fc_dims):
            raise UsageError("layer widths must be positive")
        if sorted(set(self.pool_after)) != self.pool_after or any(not 1 <= i <= 10 for i in self.pool_after):
            raise UsageError(f"pool_after must be increasing conv indices in 1..10, got {self.pool_after}")
        factor = 2 ** len(self.pool_after)
        if self.input_width < 1 or self.input_height < 1:
            raise UsageError("input dims must be positive")
        if self.input_width % factor or self.input_height % factor:
            raise UsageError(
                f"input {self.input_width}x{self.input_height} is not divisible by 2^{len(self.pool_after)}"
            )

    @property
    def scaled_conv_channels(self):
        return [max(1, round(c * self.channel_scale)) for c in self.conv_channels]

    @property
    def scaled_fc_dims(self):
        hidden = [max(1, round(d * self.channel_scale)) for d in self.fc_dims[:-1]]
        return hidden + [self.num_classes]

    @property
    def feature_dims(self):
        """(channels, height, width) entering the first FC layer."""
        factor = 2 ** len(self.pool_after)
        return self.scaled_conv_channels[-1], self.input_height // factor, self.input_width // factor

    @property
    def flatten_size(self):
        c, h, w = self.feature_dims
        return c * h * w

    def to_dict(self):
        d = asdict(self)
        d["channel_scale"] = str(self.channel_scale)
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown model config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise UsageError(f"bad model config: {exc}") from None

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ImageIOError(path, f"cannot read model config ({exc.strerror or exc})") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: line {exc.lineno}: {exc.msg}") from None


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 0.001
    epochs: int = 30
    seed: int = 42
    shuffle: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise UsageError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise UsageError(f"epochs must be >= 0, got {self.epochs}")


def desk_config(input_width=64, input_height=32, channel_scale="1/4"):
    """The reduced configuration used by tests and the desk-scale experiment."""
    return ModelConfig(input_width=input_width, input_height=input_height, channel_scale=channel_scale)
