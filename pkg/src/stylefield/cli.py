"""Command-line surface.

Subcommands: gen-toy-scene, gen-toy-styles, pretrain-scene, train-grid,
train-style, stylize, stylize-3d, mix, eval, check-properties.  Every
subcommand takes --config / --set / --seed and is deterministic for a fixed
seed.  Exit codes: 0 success, 1 failure (including a named failing numerical
property), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import torch

from . import toyscene
from .cameras import read_manifest, read_trajectory, read_view_dir
from .checkpoint import Checkpoint
from .config import RunConfig, apply_overrides, load_config
from .errors import CheckpointError, ConfigError, ValidationError
from .images import load_image, save_image
from .metrics import (ABLATION_VARIANTS, ablation_run, ablation_table_csv,
                      consistency_check)
from .pipeline import StylePipeline
from .reference3d import StyleReference, stylize_omniview
from .toyscene import (generate_scene_dir, generate_style_dir, load_scene_json,
                       visible_correspondences)
from .trainer import train_stage0, train_stage1, train_stage2

WORKERS_ENV = "STYLEFIELD_WORKERS"


def _setup(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, args.set or [])
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    workers = os.environ.get(WORKERS_ENV, "")
    if workers.isdigit() and int(workers) > 0:
        torch.set_num_threads(int(workers))
    elif cfg.threads > 0:
        torch.set_num_threads(cfg.threads)
    else:
        # default single-threaded: run-to-run determinism across processes
        torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    return cfg


def _add_common(parser):
    parser.add_argument("--config", help="run configuration file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a single config key (repeatable)")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")


def _load_pipeline(cfg: RunConfig, checkpoint_path) -> StylePipeline:
    ckpt = Checkpoint.load(checkpoint_path)
    return StylePipeline.from_checkpoint(ckpt, cfg)


def _load_styles(styles_dir):
    names = sorted(n for n in os.listdir(styles_dir)
                   if n.lower().endswith((".png", ".jpg", ".jpeg")))
    if not names:
        raise ConfigError(f"style corpus {styles_dir} holds no images")
    return [load_image(os.path.join(styles_dir, n)) for n in names]


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_gen_toy_scene(args) -> int:
    _setup(args)
    generate_scene_dir(args.out, scene_name=args.scene, n_views=args.views,
                       resolution=args.resolution)
    print(f"wrote {args.views} posed views of '{args.scene}' to {args.out}")
    return 0


def cmd_gen_toy_styles(args) -> int:
    cfg = _setup(args)
    paths = generate_style_dir(args.out, count=args.count,
                               resolution=args.resolution, seed=cfg.seed)
    print(f"wrote {len(paths)} style images to {args.out}")
    return 0


def cmd_pretrain_scene(args) -> int:
    cfg = _setup(args)
    views = read_view_dir(args.views)
    pipeline = StylePipeline.build(cfg)
    report = train_stage0(pipeline.scene, views, cfg)
    pipeline.to_checkpoint("stage0").save(args.out)
    if args.loss_csv:
        report.save(args.loss_csv)
    final = report.rows[-1]["l_rgb"] if report.rows else float("nan")
    print(f"stage0 done: final photometric loss {final:.5f}; checkpoint at {args.out}")
    return 0


def cmd_train_grid(args) -> int:
    cfg = _setup(args)
    views = read_view_dir(args.views)
    pipeline = _load_pipeline(cfg, args.scene)
    ckpt, report = train_stage1(pipeline, views, cfg)
    ckpt.save(args.out)
    if args.loss_csv:
        report.save(args.loss_csv)
    final = report.rows[-1]["l_g"] if report.rows else float("nan")
    print(f"stage1 done: final L_g {final:.5f}; checkpoint at {args.out}")
    return 0


def cmd_train_style(args) -> int:
    cfg = _setup(args)
    views = read_view_dir(args.views)
    styles = _load_styles(args.styles)
    pipeline = _load_pipeline(cfg, args.checkpoint)
    ckpt, report = train_stage2(pipeline, views, styles, cfg)
    ckpt.save(args.out)
    if args.loss_csv:
        report.save(args.loss_csv)
    final = report.rows[-1]["l_cs"] if report.rows else float("nan")
    print(f"stage2 done: final L_cs {final:.5f}; checkpoint at {args.out}")
    return 0


def cmd_stylize(args) -> int:
    cfg = _setup(args)
    pipeline = _load_pipeline(cfg, args.checkpoint)
    style = load_image(args.style)
    cameras = read_manifest(os.path.join(args.views, "cameras.txt"))
    os.makedirs(args.out, exist_ok=True)
    if args.trajectory:
        poses = read_trajectory(args.trajectory)
        template = cameras[0]
        frame_cameras = [template.with_pose(p) for p in poses]
    else:
        if not (0 <= args.view < len(cameras)):
            raise ConfigError(f"--view {args.view} outside the manifest's "
                              f"{len(cameras)} views")
        frame_cameras = [cameras[args.view]]
    for i, camera in enumerate(frame_cameras):
        frame = pipeline.stylize_view(camera, style)
        save_image(frame.clamp(0, 1), os.path.join(args.out, f"frame_{i:03d}.png"))
    print(f"wrote {len(frame_cameras)} stylized frame(s) to {args.out}")
    return 0


def cmd_stylize_3d(args) -> int:
    cfg = _setup(args)
    pipeline = _load_pipeline(cfg, args.checkpoint)
    style_views = read_view_dir(args.style_views)
    style_scene_ckpt = Checkpoint.load(args.style_checkpoint)
    style_pipeline = StylePipeline.from_checkpoint(style_scene_ckpt, cfg,
                                                   encoder=pipeline.encoder)
    content_cameras = read_manifest(os.path.join(args.views, "cameras.txt"))
    ref = StyleReference(kind="multiview3d", views=style_views,
                         front_index=args.front_style, scene=style_pipeline.scene)
    content_front = content_cameras[args.front_content].pose
    poses = read_trajectory(args.trajectory)
    frames = stylize_omniview(pipeline, content_cameras[0], poses, ref,
                              content_front=content_front)
    os.makedirs(args.out, exist_ok=True)
    for i, frame in enumerate(frames):
        save_image(frame.clamp(0, 1), os.path.join(args.out, f"frame_{i:03d}.png"))
    print(f"wrote {len(frames)} omni-view frames to {args.out}")
    return 0


def cmd_mix(args) -> int:
    cfg = _setup(args)
    pipeline = _load_pipeline(cfg, args.checkpoint)
    cameras = read_manifest(os.path.join(args.views, "cameras.txt"))
    styles = {"low": load_image(args.low), "mid": load_image(args.mid),
              "high": load_image(args.high)}
    frame = pipeline.stylize_view_mixed(cameras[args.view], styles)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    save_image(frame.clamp(0, 1), args.out)
    print(f"wrote mixed-style frame to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _setup(args)
    if bool(args.variant_table) == bool(args.consistency_check):
        raise ConfigError("eval needs exactly one of --variant-table / --consistency-check")
    views = read_view_dir(args.views)
    if args.variant_table:
        if not args.checkpoint_dir or not args.styles:
            raise ConfigError("--variant-table needs --checkpoint-dir and --styles")
        styles = _load_styles(args.styles)
        variant_pipelines = {}
        for variant in ABLATION_VARIANTS:
            path = os.path.join(args.checkpoint_dir, f"variant_{variant}")
            if not os.path.isdir(path):
                variant_pipelines[variant] = None
                continue
            level_mode = "single" if variant.startswith("single") else "multi"
            injection = "adain" if variant.endswith("adain") else "dsi"
            pipeline = _load_pipeline(cfg, path)
            variant_pipelines[variant] = (pipeline, injection, level_mode)
        rows = ablation_run(views, styles, variant_pipelines)
        table = ablation_table_csv(rows)
        with open(args.variant_table, "w", encoding="utf-8") as handle:
            handle.write(table)
        print(table, end="")
        return 0

    if not args.checkpoint or not args.style:
        raise ConfigError("--consistency-check needs --checkpoint and --style")
    pipeline = _load_pipeline(cfg, args.checkpoint)
    scene_spec = load_scene_json(os.path.join(args.views, "scene.json"))
    cam_a = views.cameras[args.pose_a]
    cam_b = views.cameras[args.pose_b]
    correspondences = visible_correspondences(scene_spec, cam_a, cam_b,
                                              count=args.points, seed=cfg.seed)
    style = load_image(args.style)
    ratio = consistency_check(pipeline, cam_a, cam_b, correspondences, style)
    print(f"consistency ratio: {ratio:.4f}")
    return 0


def cmd_check_properties(args) -> int:
    _setup(args)
    from .properties import run_all

    results = run_all(quick=args.quick)
    for result in results:
        print(result.line())
    failures = [r for r in results if not r.passed]
    if failures:
        print(f"FAILED: {failures[0].name}", file=sys.stderr)
        return 1
    print(f"all {len(results)} properties hold")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylefield",
        description="Zero-shot 3D style transfer on factorized radiance fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy-scene", help="write a parametric toy scene")
    p.add_argument("--out", required=True)
    p.add_argument("--scene", default="three-spheres",
                   choices=sorted(toyscene.SCENE_BUILDERS))
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(handler=cmd_gen_toy_scene)

    p = sub.add_parser("gen-toy-styles", help="write a procedural style corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=25)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(handler=cmd_gen_toy_styles)

    p = sub.add_parser("pretrain-scene", help="stage0: photometric base-field fit")
    p.add_argument("--views", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.set_defaults(handler=cmd_pretrain_scene)

    p = sub.add_parser("train-grid", help="stage1: feature grid reconstruction")
    p.add_argument("--views", required=True)
    p.add_argument("--scene", required=True, help="stage0 checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.set_defaults(handler=cmd_train_grid)

    p = sub.add_parser("train-style", help="stage2: stylization training")
    p.add_argument("--views", required=True)
    p.add_argument("--checkpoint", required=True, help="stage1 checkpoint")
    p.add_argument("--styles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.set_defaults(handler=cmd_train_style)

    p = sub.add_parser("stylize", help="stylize views against a 2D reference")
    p.add_argument("--checkpoint", required=True, help="stage2 checkpoint")
    p.add_argument("--views", required=True, help="scene dir (camera manifest)")
    p.add_argument("--style", required=True, help="style image")
    p.add_argument("--view", type=int, default=0)
    p.add_argument("--trajectory", help="pose file; one 4x4 pose per line")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_stylize)

    p = sub.add_parser("stylize-3d", help="omni-view stylization from a 3D reference")
    p.add_argument("--checkpoint", required=True, help="stage2 checkpoint")
    p.add_argument("--views", required=True, help="content scene dir")
    p.add_argument("--style-views", required=True, help="style object view dir")
    p.add_argument("--style-checkpoint", required=True,
                   help="stage0 checkpoint of the style field")
    p.add_argument("--front-content", type=int, required=True,
                   help="content front view index")
    p.add_argument("--front-style", type=int, required=True,
                   help="style front view index")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_stylize_3d)

    p = sub.add_parser("mix", help="per-level style mixing")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--views", required=True)
    p.add_argument("--view", type=int, default=0)
    p.add_argument("--low", required=True, help="style image for the low level")
    p.add_argument("--mid", required=True, help="style image for the mid level")
    p.add_argument("--high", required=True, help="style image for the high level")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_mix)

    p = sub.add_parser("eval", help="metric reports")
    p.add_argument("--views", required=True)
    p.add_argument("--variant-table", help="write the 4-variant ablation table here")
    p.add_argument("--checkpoint-dir", help="directory holding variant_* checkpoints")
    p.add_argument("--styles", help="style corpus for the ablation table")
    p.add_argument("--consistency-check", action="store_true")
    p.add_argument("--checkpoint", help="stage2 checkpoint (consistency mode)")
    p.add_argument("--style", help="style image (consistency mode)")
    p.add_argument("--pose-a", type=int, default=0)
    p.add_argument("--pose-b", type=int, default=1)
    p.add_argument("--points", type=int, default=64)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("check-properties", help="run the numerical property suites")
    p.add_argument("--quick", action="store_true", help="reduced draw counts")
    p.set_defaults(handler=cmd_check_properties)

    for sub_parser in sub.choices.values():
        _add_common(sub_parser)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (ConfigError,) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, CheckpointError, FileNotFoundError, KeyError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
