import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import shape_walk_parameter_count

from glitchkit.errors import (
    ArchitectureMismatchError,
    CheckpointVersionError,
    DataError,
    ImageIOError,
    NotACheckpointError,
    TruncatedCheckpointError,
    UsageError,
)
from glitchkit.evalkit import DatasetManifest, Record
from glitchkit.glitchnet import (
    GlitchNet,
    ModelCheckpoint,
    ModelConfig,
    TrainConfig,
    desk_config,
    load_checkpoint,
    load_model,
    predict,
    preprocess,
    save_checkpoint,
    train,
    train_arrays,
)
from glitchkit.glitchnet.checkpoint import decode_checkpoint, encode_checkpoint
from glitchkit.imaging import ImageRGB, write_image
from glitchkit.numerics import Tensor


def test_default_flatten_size_and_parameter_count():
    cfg = ModelConfig()
    assert cfg.flatten_size == 128 * 16 * 8 == 16384
    model = GlitchNet(cfg)
    assert model.parameter_count() == shape_walk_parameter_count(
        512, 256, cfg.conv_channels, cfg.pool_after, cfg.fc_dims, 2, 1)


def test_desk_flatten_size_and_parameter_count():
    cfg = desk_config()
    assert cfg.flatten_size == 32 * 2 * 1 == 64
    model = GlitchNet(cfg)
    assert model.parameter_count() == shape_walk_parameter_count(
        64, 32, cfg.conv_channels, cfg.pool_after, cfg.fc_dims, 2, 0.25) == 53230


@pytest.mark.parametrize("kw", [
    dict(conv_channels=[16] * 9),
    dict(fc_dims=[8, 4, 2]),
    dict(fc_dims=[8, 4, 2, 3]),
    dict(input_width=100),
    dict(channel_scale=0),
    dict(pool_after=[2, 2, 4, 6, 8]),
])
def test_config_invariants(kw):
    with pytest.raises(UsageError):
        ModelConfig(**kw)


def test_train_config_invariants():
    with pytest.raises(UsageError):
        TrainConfig(batch_size=0)
    with pytest.raises(UsageError):
        TrainConfig(learning_rate=0)


def test_config_json_roundtrip():
    cfg = desk_config()
    assert ModelConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(UsageError):
        ModelConfig.from_dict({"bogus": 1})


@settings(max_examples=10)
@given(st.integers(1, 5))
def test_forward_shape_is_n_by_k(desk_model, n):
    out = desk_model(Tensor(np.random.default_rng(n).uniform(0, 1, (n, 3, 32, 64))), training=False)
    assert out.shape == (n, 2)


def test_forward_rejects_wrong_input(desk_model):
    with pytest.raises(UsageError):
        desk_model(Tensor(np.zeros((1, 3, 64, 32))))


def test_preprocess_rotates_portrait_clockwise():
    cfg = ModelConfig(input_width=64, input_height=32, channel_scale="1/4")
    px = np.zeros((64, 32, 3), np.uint8)
    px[0, 0] = 255  # top-left of the portrait lands top-right after a clockwise turn
    x = preprocess(ImageRGB(px), cfg).data
    assert x.shape == (1, 3, 32, 64)
    assert x[0, 0, 0, 63] == 1.0 and x[0, 0, 0, 0] == 0.0


def test_preprocess_identity_and_white(rng):
    cfg = desk_config()
    px = rng.integers(0, 256, (32, 64, 3), dtype=np.uint8)
    x = preprocess(ImageRGB(px), cfg).data
    assert np.allclose(x[0].transpose(1, 2, 0), px / 255.0, atol=1e-7)
    white = preprocess(ImageRGB.filled(200, 90, (255, 255, 255)), cfg).data
    assert np.all(white == 1.0)


def test_predict_tie_goes_to_normal():
    model = GlitchNet(desk_config(), seed=1)
    model.tensors["fc4.weight"].data[:] = 0
    model.tensors["fc4.bias"].data[:] = 0
    label, probs = predict(model, ImageRGB.filled(64, 32, (10, 20, 30)))
    assert label == "normal" and np.allclose(probs, 0.5)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_predict_probabilities_sum_to_one(desk_model, seed):
    img = ImageRGB(np.random.default_rng(seed).integers(0, 256, (20, 50, 3), dtype=np.uint8))
    label, probs = predict(desk_model, img)
    assert abs(probs.sum() - 1) < 1e-6 and label in ("normal", "glitch")


def test_predict_is_pure(desk_model, rng):
    img = ImageRGB(rng.integers(0, 256, (32, 64, 3), dtype=np.uint8))
    before = desk_model.state_arrays()
    a, b = predict(desk_model, img), predict(desk_model, img)
    assert a[0] == b[0] and a[1].tobytes() == b[1].tobytes()
    assert all(np.array_equal(before[k], v) for k, v in desk_model.state_arrays().items())


def test_concurrent_inference_matches_serial(desk_model, rng):
    imgs = [ImageRGB(rng.integers(0, 256, (32, 64, 3), dtype=np.uint8)) for _ in range(6)]
    serial = [predict(desk_model, im)[1] for im in imgs]
    out = [None] * len(imgs)

    def work(i):
        out[i] = predict(desk_model, imgs[i])[1]

    threads = [threading.Thread(target=work, args=(i,)) for i in range(len(imgs))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(a.tobytes() == b.tobytes() for a, b in zip(serial, out))


# checkpoints

def test_checkpoint_roundtrip_bitwise(tmp_path, desk_model):
    path = save_checkpoint(tmp_path / "m.glib", desk_model)
    back = load_checkpoint(path)
    assert back.config == desk_model.config
    for k, v in desk_model.state_arrays().items():
        assert back.tensors[k].tobytes() == v.tobytes()
    assert encode_checkpoint(back) == path.read_bytes()


def test_checkpoint_layout_header(desk_model):
    buf = encode_checkpoint(ModelCheckpoint.from_model(desk_model))
    assert buf[:4] == b"GLIB"
    assert int.from_bytes(buf[4:8], "little") == 1
    n = int.from_bytes(buf[8:12], "little")
    assert json.loads(buf[12:12 + n])["channel_scale"] == "1/4"
    name_len = int.from_bytes(buf[12 + n:14 + n], "little")
    assert buf[14 + n:14 + n + name_len] == b"conv1.weight"


def test_checkpoint_errors(desk_model):
    buf = encode_checkpoint(ModelCheckpoint.from_model(desk_model))
    with pytest.raises(NotACheckpointError, match="not a checkpoint"):
        decode_checkpoint(b"XXXX" + buf[4:])
    with pytest.raises(TruncatedCheckpointError, match="truncated checkpoint"):
        decode_checkpoint(buf[:-3])
    with pytest.raises(CheckpointVersionError):
        decode_checkpoint(buf[:4] + (2).to_bytes(4, "little") + buf[8:])


def test_checkpoint_architecture_mismatch(desk_model):
    ck = ModelCheckpoint.from_model(desk_model)
    ck.tensors["fc1.weight"] = np.zeros((3, 3), np.float32)
    with pytest.raises(ArchitectureMismatchError):
        decode_checkpoint(encode_checkpoint(ck))


def test_load_model_missing_file(tmp_path):
    with pytest.raises(ImageIOError):
        load_model(tmp_path / "nope.glib")


# training

def _manifest(tmp_path, n=8, seed=0):
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(n):
        label = "glitch" if i % 2 else "normal"
        px = np.full((32, 64, 3), 40 if label == "normal" else 200, np.uint8)
        px = np.clip(px + rng.integers(-30, 30, px.shape), 0, 255).astype(np.uint8)
        write_image(tmp_path / f"{i}.png", ImageRGB(px))
        recs.append(Record(f"{i}.png", label))
    return DatasetManifest(recs, tmp_path)


def test_training_is_deterministic_and_loss_drops(tmp_path):
    m = _manifest(tmp_path)
    tc = TrainConfig(batch_size=4, epochs=2, seed=9)
    a = train(m, desk_config(), tc)
    b = train(m, desk_config(), tc)
    assert encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint)
    assert abs(a.history[0]["loss"] - math.log(2)) < 0.05
    assert a.history[1]["loss"] < a.history[0]["loss"]


def test_zero_epochs_gives_initialized_weights(tmp_path):
    res = train(_manifest(tmp_path), desk_config(), TrainConfig(epochs=0, seed=4))
    init = GlitchNet(desk_config(), seed=4).state_arrays()
    assert all(np.array_equal(res.checkpoint.tensors[k], v) for k, v in init.items())
    assert [h["epoch"] for h in res.history] == [0]


def test_training_log_is_jsonl(tmp_path):
    train(_manifest(tmp_path), desk_config(), TrainConfig(epochs=2, batch_size=4), log_path=tmp_path / "log.jsonl")
    rows = [json.loads(x) for x in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in rows] == [0, 1, 2]
    assert set(rows[0]) == {"epoch", "loss", "train_acc", "val_acc"}


def test_single_class_and_unreadable_errors(tmp_path):
    m = _manifest(tmp_path)
    with pytest.raises(DataError):
        train(m.subset([r for r in m.records if r.label == "normal"]), desk_config(), TrainConfig(epochs=1))
    broken = DatasetManifest(m.records + [Record("missing.png", "glitch", generator="captured")], tmp_path)
    with pytest.raises(ImageIOError, match="missing.png"):
        train(broken, desk_config(), TrainConfig(epochs=1))


def test_best_validation_epoch_is_kept(tmp_path):
    m = _manifest(tmp_path)
    res = train(m, desk_config(), TrainConfig(epochs=4, batch_size=4), val_manifest=m)
    accs = [h["val_acc"] for h in res.history[1:]]
    assert res.best_epoch == 1 + accs.index(max(accs))


def test_label_flip_flips_predictions():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, (8, 3, 32, 64)).astype(np.float32)
    y = np.array([0, 1] * 4)
    tc = TrainConfig(batch_size=8, epochs=60, learning_rate=3e-3, seed=2)
    a = train_arrays(x, y, desk_config(), tc)
    b = train_arrays(x, 1 - y, desk_config(), tc)
    pa = a.model(Tensor(x)).data.argmax(1)
    pb = b.model(Tensor(x)).data.argmax(1)
    assert np.array_equal(pa, y) and np.array_equal(pb, 1 - y)
