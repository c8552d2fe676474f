"""``glitchkit`` command line.

Exit codes: 0 success, 1 failed self-check, 2 usage, 3 I/O, 4 data, 5 model.
"""

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from .errors import GlitchKitError, ImageIOError, UsageError

log = logging.getLogger("glitchkit")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _fraction_list(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def bundled(kind, name):
    """Path of a bundled data file (``kind`` is ``configs`` or ``scenes``)."""
    return resources.files("glitchkit").joinpath("data", kind, name)


def _model_config(ref):
    from .glitchnet import ModelConfig

    p = Path(ref)
    if not p.is_file() and not p.suffix:
        candidate = bundled("configs", f"{ref}.json")
        if candidate.is_file():
            p = Path(str(candidate))
    return ModelConfig.load(p)


def _out(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ImageIOError(out, f"cannot create output directory ({exc.strerror})") from None
    return out


def _print_counts(manifest, path):
    counts = manifest.counts()
    by_class = {}
    for r in manifest.records:
        if r.glitch_class:
            by_class[r.glitch_class] = by_class.get(r.glitch_class, 0) + 1
    print(f"wrote {path}")
    print(f"normal {counts['normal']}  glitch {counts['glitch']}")
    for k in sorted(by_class):
        print(f"  {k:<22} {by_class[k]}")


def cmd_synth_rules(args):
    from .augment_rules import RULES, RegionConstraints, generate_rule_dataset
    from .evalkit import DatasetManifest

    rules = list(RULES) if args.rules == "all" else [r.strip() for r in args.rules.split(",") if r.strip()]
    palette = {"random": "random_rgb", "fixed": "fixed_palette"}[args.palette]
    normals = DatasetManifest.load(args.normals)
    out = _out(args)
    m = generate_rule_dataset(normals, rules, args.seed, out, palette, RegionConstraints(args.min_frac, args.max_frac),
                              include_normals=not args.glitches_only)
    _print_counts(m, m.save(out / "manifest.jsonl"))
    return EXIT_OK


def cmd_scenes(args):
    from .experiment import CLEARFLAG_ONSET, game_styles
    from .rendersim import fault_cycle, random_fault, random_scene, save_scene_file, scene_seeds

    out = _out(args)
    styles = game_styles(args.seed, args.games)
    kinds = fault_cycle(args.count)
    for i, s in enumerate(scene_seeds(args.seed, args.count)):
        sc = random_scene(s, args.width, args.height, args.frames, style=styles[i % args.games])
        onset = CLEARFLAG_ONSET if kinds[i] == "clearflag_override" else None
        save_scene_file(out / f"{sc.name}.json", sc, [random_fault(s, sc, kinds[i], onset_frame=onset)])
    print(f"wrote {args.count} scene files to {out}")
    return EXIT_OK


def cmd_synth_inject(args):
    from .rendersim import generate_injection_dataset, load_scene_dir

    files = load_scene_dir(args.scenes)
    out = _out(args)
    m = generate_injection_dataset([f.scene for f in files], [f.faults for f in files], args.seed, out,
                                   last_frame_only=args.last_frame_only)
    _print_counts(m, m.save(out / "manifest.jsonl"))
    return EXIT_OK


def cmd_split(args):
    from .evalkit import DatasetManifest, split_manifest

    m = DatasetManifest.load(args.manifest)
    out = _out(args)
    for name, part in zip(("train", "val", "test"), split_manifest(m, args.fractions, args.seed)):
        c = part.counts()
        print(f"{name:<5} {len(part):>5}  normal {c['normal']}  glitch {c['glitch']}  -> {part.save(out / f'{name}.jsonl')}")
    return EXIT_OK


def cmd_train(args):
    from .evalkit import DatasetManifest
    from .glitchnet import TrainConfig, save_checkpoint, train
    from .plots import training_curves

    cfg = _model_config(args.config)
    tcfg = TrainConfig(batch_size=args.batch_size, learning_rate=args.learning_rate, epochs=args.epochs,
                       seed=args.seed)
    manifest = DatasetManifest.load(args.manifest)
    val = DatasetManifest.load(args.val) if args.val else None
    out = _out(args)
    result = train(manifest, cfg, tcfg, val_manifest=val, log_path=out / "train_log.jsonl")
    path = save_checkpoint(out / "model.glib", result.checkpoint)
    if not args.no_figures:
        training_curves(result.history, out / "training_curves.png")
    last = result.history[-1]
    print(f"epochs {tcfg.epochs}  best_epoch {result.best_epoch}  final_loss {last['loss']:.4f}  "
          f"train_acc {last['train_acc']:.3f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_eval(args):
    from .evalkit import DatasetManifest, evaluate
    from .experiment import write_verdicts
    from .glitchnet import load_model
    from .plots import confusion_matrix

    model = load_model(args.checkpoint)
    manifest = DatasetManifest.load(args.manifest)
    metrics, verdicts = evaluate(model, manifest)
    out = _out(args)
    (out / "metrics.json").write_text(metrics.to_json() + "\n")
    write_verdicts(out / "verdicts.csv", verdicts)
    if not args.no_figures:
        confusion_matrix(metrics, out / "confusion.png")
    print(metrics.table())
    return EXIT_OK


def cmd_detect(args):
    from .glitchnet import load_model, predict
    from .imaging import read_image, write_image
    from .saliency import compute_saliency, render_heatmap, write_raw_saliency

    model = load_model(args.checkpoint)
    image = read_image(args.image)
    label, probs = predict(model, image)
    print(f"{label} {probs[0]:.6f} {probs[1]:.6f}")
    if args.saliency or args.raw:
        sal = compute_saliency(model, image)
        if args.saliency:
            write_image(args.saliency, render_heatmap(sal, image, args.alpha))
        if args.raw:
            write_raw_saliency(args.raw, sal)
    return EXIT_OK


def cmd_gradcheck(args):
    from .numerics.gradcheck import run_gradcheck

    results = run_gradcheck(seed=args.seed, instances=args.instances)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_experiment(args):
    from .experiment import DeskSettings, run_desk_experiment

    settings = DeskSettings(seed=args.seed, figures=not args.no_figures)
    if args.epochs is not None:
        settings.epochs = args.epochs
    r = run_desk_experiment(_out(args), settings)
    print(r.metrics.table())
    s = r.saliency
    if s["scored"]:
        print(f"saliency: {s['scored']} glitches scored, mean top-{s['top_fraction']:.0%} precision "
              f"{s['mean_score']:.3f} vs mask density {s['mean_density']:.3f} (x{s['ratio']:.2f})")
    print(json.dumps({"checkpoint_sha256": r.checkpoint_sha256, "report_sha256": r.report_sha256}))
    return EXIT_OK


def _global_flags(p, default):
    d = (lambda v: v) if default else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=_seed, default=d(42), help="root seed for every random choice (default 42)")
    p.add_argument("--out", default=d("glitchkit_out"), help="output directory (default ./glitchkit_out)")
    p.add_argument("--log-level", default=d("WARNING"), choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser():
    p = _Parser(prog="glitchkit", description="Synthesize GUI glitches, train and run a glitch detector.")
    _global_flags(p, default=True)
    # global flags are also accepted after the subcommand
    common = _Parser(add_help=False)
    _global_flags(common, default=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser
    sub.add_parser = lambda name, **kw: _add(name, parents=[common], **kw)

    s = sub.add_parser("synth-rules", help="derive rule-based glitch images from normal screenshots")
    s.add_argument("--normals", required=True, help="manifest of normal images")
    s.add_argument("--rules", default="all", help="comma-separated rules or 'all'")
    s.add_argument("--palette", choices=["random", "fixed"], default="random")
    s.add_argument("--min-frac", type=float, default=0.02)
    s.add_argument("--max-frac", type=float, default=0.25)
    s.add_argument("--glitches-only", action="store_true", help="omit the source normals from the manifest")
    s.set_defaults(func=cmd_synth_rules)

    s = sub.add_parser("scenes", help="write procedural scene JSON files, one fault each")
    s.add_argument("--count", type=int, default=12)
    s.add_argument("--games", type=int, default=2)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--height", type=int, default=32)
    s.add_argument("--frames", type=int, default=4)
    s.set_defaults(func=cmd_scenes)

    s = sub.add_parser("synth-inject", help="render scenes with their faults into normal and glitch frames")
    s.add_argument("--scenes", required=True, help="directory of scene JSON files")
    s.add_argument("--last-frame-only", action="store_true", help="keep only each scene's and fault's final frame")
    s.set_defaults(func=cmd_synth_inject)

    s = sub.add_parser("split", help="stratified train/val/test split of a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--fractions", type=_fraction_list, default=[0.7, 0.15, 0.15])
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train the detector")
    s.add_argument("--manifest", required=True)
    s.add_argument("--val", help="validation manifest (keeps the best-validation weights)")
    s.add_argument("--config", default="desk", help="model config JSON path or bundled name (desk, default)")
    s.add_argument("--epochs", type=int, default=30)
    s.add_argument("--batch-size", type=int, default=16)
    s.add_argument("--learning-rate", type=float, default=1e-3)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="metrics, verdicts and confusion matrix on a manifest")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("detect", help="classify one screenshot")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--image", required=True)
    s.add_argument("--saliency", help="write a heatmap overlay PNG here")
    s.add_argument("--raw", help="write raw float32 saliency here (plus a .json sidecar)")
    s.add_argument("--alpha", type=float, default=0.5)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("gradcheck", help="finite-difference check of every layer and the desk network")
    s.add_argument("--instances", type=int, default=5)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("experiment", help="desk-scale synthesize/train/evaluate/localize run")
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GlitchKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
