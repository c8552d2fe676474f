"""The glitch detector network, preprocessing and single-image inference."""

from collections import OrderedDict

import numpy as np

from ..errors import ModelError, UsageError
from ..imaging import ImageRGB, resize_bilinear, rotate_clockwise
from ..numerics import Tensor, batchnorm2d, conv2d, flatten, linear, maxpool2d, relu
from ..numerics.nn import _softmax
from ..seeding import derive_rng
from .config import LABELS

# std of the final classifier layer; keeps initial logits near zero so the
# starting loss sits at ln(K)
HEAD_INIT_STD = 0.01


class GlitchNet:
    """conv3x3 -> BN -> ReLU (x10, max-pool after the configured convs), then 4 FC layers.

    Parameters live in ``self.tensors`` (an ordered name -> Tensor map) that
    matches the checkpoint layout exactly.
    """

    def __init__(self, config, seed=0):
        self.config = config
        self.tensors = OrderedDict()
        rng = derive_rng(seed, "glitchnet", "init")
        in_ch = 3
        for i, out_ch in enumerate(config.scaled_conv_channels, start=1):
            fan_in = in_ch * 9
            self._add(f"conv{i}.weight", rng.standard_normal((out_ch, in_ch, 3, 3)) * np.sqrt(2.0 / fan_in), True)
            self._add(f"conv{i}.bias", np.zeros(out_ch), True)
            self._add(f"bn{i}.gamma", np.ones(out_ch), True)
            self._add(f"bn{i}.beta", np.zeros(out_ch), True)
            self._add(f"bn{i}.running_mean", np.zeros(out_ch), False)
            self._add(f"bn{i}.running_var", np.ones(out_ch), False)
            in_ch = out_ch
        in_dim = config.flatten_size
        dims = config.scaled_fc_dims
        for j, out_dim in enumerate(dims, start=1):
            std = HEAD_INIT_STD if j == len(dims) else np.sqrt(2.0 / in_dim)
            self._add(f"fc{j}.weight", rng.standard_normal((out_dim, in_dim)) * std, True)
            self._add(f"fc{j}.bias", np.zeros(out_dim), True)
            in_dim = out_dim

    def _add(self, name, value, trainable):
        self.tensors[name] = Tensor(np.asarray(value, dtype=np.float32), requires_grad=trainable, name=name)

    def parameters(self):
        return [t for t in self.tensors.values() if t.requires_grad]

    def parameter_count(self):
        return sum(t.data.size for t in self.parameters())

    def forward(self, x, training=False):
        """Logits ``[N, K]`` for a batch ``x[N, 3, H, W]`` in [0, 1]."""
        cfg = self.config
        if x.ndim != 4 or x.shape[1:] != (3, cfg.input_height, cfg.input_width):
            raise UsageError(
                f"expected input [N, 3, {cfg.input_height}, {cfg.input_width}], got {list(x.shape)}"
            )
        t = self.tensors
        pools = set(cfg.pool_after)
        for i in range(1, 11):
            x = conv2d(x, t[f"conv{i}.weight"], t[f"conv{i}.bias"], stride=1, padding=1)
            x = batchnorm2d(
                x, t[f"bn{i}.gamma"], t[f"bn{i}.beta"], t[f"bn{i}.running_mean"], t[f"bn{i}.running_var"],
                training=training,
            )
            x = relu(x)
            if i in pools:
                x = maxpool2d(x, 2, 2)
        x = flatten(x)
        n_fc = len(cfg.fc_dims)
        for j in range(1, n_fc + 1):
            x = linear(x, t[f"fc{j}.weight"], t[f"fc{j}.bias"])
            if j < n_fc:
                x = relu(x)
        return x

    __call__ = forward

    def state_arrays(self):
        return OrderedDict((k, v.data.copy()) for k, v in self.tensors.items())

    def load_arrays(self, arrays):
        expected = set(self.tensors)
        got = set(arrays)
        if expected != got:
            missing, extra = sorted(expected - got), sorted(got - expected)
            raise ModelError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
        for name, t in self.tensors.items():
            arr = np.asarray(arrays[name])
            if arr.shape != t.shape:
                raise ModelError(f"{name}: shape {list(arr.shape)} does not match architecture {list(t.shape)}")
            t.data = np.ascontiguousarray(arr, dtype=np.float32)


def build_model(config, seed=0):
    return GlitchNet(config, seed=seed)


def preprocess(image, config):
    """ImageRGB -> Tensor[1, 3, H, W] with values in [0, 1].

    Portrait images are rotated 90 degrees clockwise, then stretch-resized
    (bilinear) to the configured input size.
    """
    if not isinstance(image, ImageRGB):
        image = ImageRGB(image)
    px = image.pixels
    if px.shape[0] == 0 or px.shape[1] == 0:
        raise UsageError("cannot preprocess an empty image")
    if px.shape[0] > px.shape[1]:
        px = rotate_clockwise(px)
    arr = px.astype(np.float32) / np.float32(255.0)
    arr = resize_bilinear(arr, config.input_width, config.input_height)
    return Tensor(np.ascontiguousarray(arr.transpose(2, 0, 1)[None]))


# inference batches hold at most this many input pixels, bounding im2col memory
INFERENCE_PIXEL_BUDGET = 2**20


def inference_batch_size(config, cap):
    return max(1, min(cap, INFERENCE_PIXEL_BUDGET // (config.input_width * config.input_height)))


def predict_logits(model, batch):
    """Inference-mode logits for a preprocessed ``[N, 3, H, W]`` array."""
    return model.forward(Tensor(batch), training=False).data


def predict(model, image):
    """(label, probabilities) for one image; equal logits resolve to ``normal``."""
    logits = predict_logits(model, preprocess(image, model.config).data)
    probs = _softmax(logits.astype(np.float64))[0]
    label = int(np.argmax(logits[0]))
    return LABELS[label], probs
