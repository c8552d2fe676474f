import hashlib
import json

import numpy as np
import pytest
from conftest import tiny_scene
from hypothesis import given
from hypothesis import strategies as st
from properties import check_clearflag_semantics, check_injection_mask_correctness, check_mirror_involution

from glitchkit.errors import ImageIOError
from glitchkit.imaging import read_mask
from glitchkit.rendersim import (
    CameraSpec,
    DrawableSpec,
    FaultSpec,
    LayerSpec,
    PostEffect,
    SceneSpec,
    SpecError,
    fault_cycle,
    generate_injection_dataset,
    load_scene_dir,
    load_scene_file,
    random_fault,
    random_scene,
    render_scene,
    render_with_fault,
    save_scene_file,
)

seeds = st.integers(0, 2**63 - 1)


@given(seeds)
def test_mask_is_exact_pixel_difference(seed):
    check_injection_mask_correctness(seed)


@given(st.integers(0, 2**32 - 1))
def test_clearflag_semantics(seed):
    check_clearflag_semantics(seed)


@given(seeds)
def test_mirror_involution(seed):
    check_mirror_involution(seed)


def test_solid_clear_without_layers_is_clear_color():
    scene = SceneSpec(8, 6, (LayerSpec("empty"),),
                      (CameraSpec(clear_flag="SolidColor", clear_color=(1, 2, 3), layer_mask=(0,)),), frame_count=3)
    for f in render_scene(scene):
        assert np.all(f.pixels == (1, 2, 3))


def test_static_scene_frames_identical_and_deterministic():
    scene = tiny_scene(velocity=(0, 0), frames=4)
    frames = render_scene(scene)
    assert all(f == frames[0] for f in frames)
    assert [f.pixels.tobytes() for f in render_scene(random_scene(3))] == \
           [f.pixels.tobytes() for f in render_scene(random_scene(3))]


def test_stale_mirror_bottom_half_is_flipped_top():
    scene = tiny_scene(frames=2)
    frames, masks, cls = render_with_fault(scene, FaultSpec("stale_post_effect", 0, 0))
    px, clean = frames[1].pixels, render_scene(scene)[1].pixels
    h = px.shape[0]
    assert np.array_equal(px[h - h // 2:], clean[:h // 2][::-1])
    assert cls == "partial_repetition"


def test_nothing_clear_leaves_trail_of_moving_sprite():
    # 10 px/frame rightward; oracle: union of every imprint so far
    layer = LayerSpec("w", (DrawableSpec("rect", 0, 2, 6, 4, color=(255, 0, 0), velocity=(10, 0)),))
    scene = SceneSpec(64, 10, (layer,), (CameraSpec(clear_flag="SolidColor", layer_mask=(0,)),), frame_count=5)
    frames, _, _ = render_with_fault(scene, FaultSpec("clearflag_override", 0, 0, clear_flag="Nothing"))
    for t, f in enumerate(frames):
        oracle = np.zeros((10, 64), bool)
        for k in range(t + 1):
            oracle[2:6, 10 * k:10 * k + 6] = True
        assert np.array_equal(np.all(f.pixels == (255, 0, 0), axis=2), oracle)


def test_camera_disabled_covers_most_pixels():
    scene = random_scene(8, 64, 32, frame_count=2)
    single = SceneSpec(64, 32, scene.layers, (scene.cameras[0],), 2, scene.seed)
    for mode, cls_ in (("blocks", "abnormal_color_block"), ("noise", "random_noise")):
        _, masks, cls = render_with_fault(single, FaultSpec("camera_disabled", 0, 1, texture_mode=mode))
        assert cls == cls_ and masks[1].density >= 0.95 and masks[0].area == 0


def test_overexpose_and_letterbox_classes():
    scene = tiny_scene(frames=1)
    _, m1, c1 = render_with_fault(scene, FaultSpec("stale_post_effect", 0, 0, effect=PostEffect("overexpose", 2.0)))
    _, m2, c2 = render_with_fault(scene, FaultSpec("stale_post_effect", 0, 0, effect=PostEffect("letterbox", size=2)))
    assert (c1, c2) == ("overexposed", "black_border") and m2[0].area > 0


def test_onset_past_end_errors():
    with pytest.raises(SpecError):
        render_with_fault(tiny_scene(frames=3), FaultSpec("camera_disabled", 0, 3))
    with pytest.raises(SpecError):
        render_with_fault(tiny_scene(frames=3), FaultSpec("camera_disabled", 2, 0))


def test_injection_dataset_counts(tmp_path):
    scenes = [random_scene(s, 48, 24, frame_count=10) for s in range(5)]
    faults = [[FaultSpec("camera_disabled", 0, 5)] for _ in scenes]
    m = generate_injection_dataset(scenes, faults, 1, tmp_path)
    c = m.counts()
    assert c == {"normal": 50, "glitch": 25}
    for r in m.records:
        if r.label == "glitch":
            assert read_mask(m.resolve(r.mask_path)).area > 0 and r.glitch_class
            assert r.meta["frame"] >= 5 and r.meta["fault"]["fault"] == "camera_disabled"
        assert r.meta["run_seed"] == 1


def test_injection_dataset_last_frame_only_and_determinism(tmp_path):
    scenes = [random_scene(s, 48, 24, frame_count=4) for s in range(3)]
    faults = [[random_fault(s, sc, k, onset_frame=1)] for s, (sc, k) in enumerate(zip(scenes, fault_cycle(3)))]
    a = generate_injection_dataset(scenes, faults, 2, tmp_path / "a", last_frame_only=True)
    b = generate_injection_dataset(scenes, faults, 2, tmp_path / "b", last_frame_only=True)
    assert a.counts()["normal"] == 3 and all(r.meta["frame"] == 3 for r in a.records)
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]
    for r in a.records:
        pa, pb = a.resolve(r.image_path), b.resolve(r.image_path)
        assert hashlib.sha256(pa.read_bytes()).digest() == hashlib.sha256(pb.read_bytes()).digest()
    assert {r.glitch_class for r in a.records if r.label == "glitch"} >= {"frame_overlay", "partial_repetition"}


def test_scene_file_roundtrip(tmp_path):
    scene = random_scene(4, 64, 32)
    fault = random_fault(4, scene, "stale_post_effect")
    save_scene_file(tmp_path / "s.json", scene, [fault])
    back = load_scene_file(tmp_path / "s.json")
    assert back.scene == scene and back.faults == [fault]
    assert [f.scene for f in load_scene_dir(tmp_path)] == [scene]


def test_malformed_scene_diagnostics(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"width": 10,\n "height": }')
    with pytest.raises(SpecError, match=r"bad.json:2"):
        load_scene_file(p)
    d = random_scene(1, 32, 16).to_dict()
    d["cameras"][0]["clear_flag"] = "Sometimes"
    p.write_text(json.dumps(d))
    with pytest.raises(SpecError, match=r"cameras\[0\]\.clear_flag"):
        load_scene_file(p)
    d = random_scene(1, 32, 16).to_dict()
    d["faults"] = [{"fault": "camera_disabled", "onset_frame": 99}]
    p.write_text(json.dumps(d))
    with pytest.raises(SpecError, match=r"faults\[0\]"):
        load_scene_file(p)


def test_scene_dir_errors(tmp_path):
    with pytest.raises(ImageIOError):
        load_scene_dir(tmp_path / "nope")
    with pytest.raises(ImageIOError):
        load_scene_dir(tmp_path)


def test_spec_invariants():
    with pytest.raises(SpecError):
        SceneSpec(8, 8, (), ())
    with pytest.raises(SpecError):
        SceneSpec(8, 8, (LayerSpec("a"),), (CameraSpec(layer_mask=(1,)),))
    with pytest.raises(SpecError):
        PostEffect.from_dict({"effect": "overexpose", "gain": 0})


def test_bundled_scene_pack_parses():
    from glitchkit.cli import bundled

    files = load_scene_dir(bundled("scenes", ""))
    assert len(files) >= 6 and all(f.faults for f in files)
    assert {f.faults[0].fault for f in files} == {"camera_disabled", "clearflag_override", "stale_post_effect"}
