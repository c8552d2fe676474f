from .dataset import generate_injection_dataset
from .procedural import FAULT_KINDS, GameStyle, fault_cycle, random_fault, random_scene, scene_seeds
from .render import apply_post_effect, diff_mask, glitch_class_for, render_scene, render_with_fault
from .scene import (
    CLEAR_FLAGS,
    CameraSpec,
    DrawableSpec,
    FaultSpec,
    LayerSpec,
    PostEffect,
    SceneFile,
    SceneSpec,
    SpecError,
    Texture,
    load_scene_dir,
    load_scene_file,
    save_scene_file,
)

__all__ = [
    "CLEAR_FLAGS",
    "FAULT_KINDS",
    "GameStyle",
    "CameraSpec",
    "DrawableSpec",
    "FaultSpec",
    "LayerSpec",
    "PostEffect",
    "SceneFile",
    "SceneSpec",
    "SpecError",
    "Texture",
    "apply_post_effect",
    "diff_mask",
    "fault_cycle",
    "generate_injection_dataset",
    "glitch_class_for",
    "load_scene_dir",
    "load_scene_file",
    "save_scene_file",
    "random_fault",
    "random_scene",
    "render_scene",
    "render_with_fault",
    "scene_seeds",
]
