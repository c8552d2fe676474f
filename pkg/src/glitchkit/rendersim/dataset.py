import logging
from pathlib import Path

from ..evalkit.manifest import DatasetManifest, Record
from ..imaging import write_image, write_mask
from .render import render_scene, render_with_fault

log = logging.getLogger(__name__)


def _safe(name):
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def generate_injection_dataset(scenes, faults, seed, out_dir, include_normals=True, last_frame_only=False):
    """Render every scene clean and under each of its faults.

    ``faults[i]`` lists the faults for ``scenes[i]``. Clean frames become
    normal records; faulted frames from the onset on become glitch records
    with a difference mask. A faulted frame identical to its clean frame is
    skipped (the fault had no visible effect there) and logged. With
    ``last_frame_only`` each scene and each fault contribute only the final
    frame, where accumulating faults such as a missing clear are most visible.
    """
    out_dir = Path(out_dir)
    if len(faults) != len(scenes):
        raise ValueError(f"{len(scenes)} scenes but {len(faults)} fault lists")
    records = []
    for si, (scene, scene_faults) in enumerate(zip(scenes, faults)):
        tag = f"{si:04d}_{_safe(scene.name)}"
        scene_meta = {"scene": scene.name, "scene_index": si, "run_seed": int(seed)}
        if include_normals:
            for t, frame in enumerate(render_scene(scene)):
                if last_frame_only and t != scene.frame_count - 1:
                    continue
                rel = f"images/{tag}_f{t:03d}_clean.png"
                write_image(out_dir / rel, frame)
                records.append(Record(rel, "normal", generator="injection", seed=scene.seed,
                                      meta={**scene_meta, "frame": t, "fault": None}))
        for fi, fault in enumerate(scene_faults):
            frames, masks, glitch_class = render_with_fault(scene, fault)
            first = scene.frame_count - 1 if last_frame_only else fault.onset_frame
            for t in range(max(first, fault.onset_frame), scene.frame_count):
                if not masks[t].area:
                    log.warning("%s: fault %s invisible at frame %d, skipped", scene.name, fault.fault, t)
                    continue
                stem = f"{tag}_f{t:03d}_fault{fi}_{fault.fault}"
                write_image(out_dir / f"images/{stem}.png", frames[t])
                write_mask(out_dir / f"masks/{stem}.png", masks[t])
                records.append(Record(
                    f"images/{stem}.png", "glitch", glitch_class=glitch_class, mask_path=f"masks/{stem}.png",
                    generator="injection", seed=scene.seed,
                    meta={**scene_meta, "frame": t, "fault": fault.to_dict()},
                ))
    return DatasetManifest(records, out_dir)
