"""Command-line entry point.

Subcommands:
    synth     generate a synthetic room dataset with ground truth
    odometry  track a dataset, writing the point cloud (PLY) and trajectory (TUM)
    train     fit a splat scene from a cloud + trajectory over dataset frames
    compare   dense-vs-sparse initialization study over several seeds

Exit codes: 0 success, 2 invalid arguments/config, 3 tracking lost, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import (
    InsufficientTextureError,
    InvalidArgumentError,
    LoadError,
    PhotosplatError,
    TrackingLostError,
)
from .harness.compare import CompareConfig, run_comparison
from .harness.dataset import load_dataset, write_dataset
from .harness.outputs import write_outputs, write_trace_csv
from .harness.reference import reference_summary_lines
from .harness.synthetic import SceneConfig, generate_synthetic_scene
from .odometry import PointStatus, frames_from_arrays, run_odometry
from .pointcloud import export_point_cloud, read_ply, write_ply
from .splat.model import save_scene_ply
from .trajectory import read_tum, write_tum

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_TRACKING_LOST = 3
EXIT_IO = 4


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise InvalidArgumentError(f"--res expects WxH, got {text!r}") from exc


def _parse_seeds(text: str) -> list[int]:
    """Accepts '0..9' ranges (inclusive) or comma lists like '0,3,7'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise InvalidArgumentError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(t) for t in text.split(",") if t != ""]


def _parse_checkpoints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t != "")


def _cmd_synth(args) -> int:
    cfg = SceneConfig(
        resolution=_parse_resolution(args.res),
        frame_count=args.frames,
        textureless_fraction=args.textureless,
        # keep per-frame motion trackable regardless of sequence length
        orbit_degrees=min(70.0, 2.4 * (args.frames - 1)),
    )
    scene = generate_synthetic_scene(args.seed, cfg)
    out = write_dataset(scene, args.out)
    print(f"wrote {scene.config.frame_count} frames to {out}")
    return EXIT_OK


def _cmd_odometry(args) -> int:
    app = load_config(args.config)
    data = load_dataset(args.data)
    frames = frames_from_arrays(data.colors, data.exposures)
    odo_cfg = replace(app.odometry, selection=app.selection)
    result = run_odometry(frames, data.camera, odo_cfg)
    points = result.cloud
    if args.tracking_only:
        points = [p for p in points if p.status == PointStatus.POSE_TRACKING]
    cloud = export_point_cloud(points, data.camera, {f.id: f for f in result.frames})
    write_ply(cloud, args.out_cloud)
    write_tum(args.out_traj, result.trajectory, timestamps=result.keyframe_ids)
    print(
        f"tracked {len(result.frame_poses)} frames, {len(result.keyframe_ids)} keyframes, "
        f"exported {len(cloud)} points"
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    app = load_config(args.config)
    data = load_dataset(args.data)
    cloud = read_ply(args.cloud)
    stamped = read_tum(args.traj)
    images = []
    poses = []
    for ts, pose in stamped:
        idx = int(round(ts))
        if not 0 <= idx < len(data.colors):
            raise InvalidArgumentError(f"trajectory timestamp {ts} has no frame")
        images.append(data.colors[idx])
        poses.append(pose)
    if len(images) < 2:
        raise InvalidArgumentError("need at least 2 posed frames to train")
    from .harness.compare import train_with_trace

    train_cfg = replace(app.splat, iterations=args.iters)
    checkpoints = tuple(
        sorted({c for c in app.harness.checkpoints if c <= args.iters} | {args.iters})
    )
    eval_ids = tuple(i for i in range(len(images)) if i % app.harness.eval_every == 0)
    if len(eval_ids) == len(images):
        eval_ids = eval_ids[:-1]
    trace, scene, _ = train_with_trace(
        cloud, np.stack(images), poses, data.camera, train_cfg, checkpoints,
        eval_ids, seed=0, label="train", record_timing=app.harness.record_timing,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scene_ply(scene, out / "scene.ply")
    write_trace_csv([trace], out / "trace.csv")
    final = trace.records[-1]
    print(f"trained {args.iters} iterations, {final.count} Gaussians, "
          f"held-out PSNR {final.psnr:.2f} dB")
    return EXIT_OK


def _cmd_compare(args) -> int:
    seeds = _parse_seeds(args.seeds)
    app = load_config(args.config)
    data = load_dataset(args.data)
    base = app.harness.compare_config()
    cmp_cfg = CompareConfig(
        checkpoints=_parse_checkpoints(args.checkpoints) if args.checkpoints else base.checkpoints,
        eval_every=base.eval_every,
        workers=args.workers if args.workers else base.workers,
        record_timing=base.record_timing and not args.no_timing,
    )
    odo_cfg = replace(app.odometry, selection=app.selection)
    result = run_comparison(
        data, seeds, train_config=app.splat, compare_config=cmp_cfg, odometry_config=odo_cfg
    )
    paths = write_outputs(result, args.out)
    for line in reference_summary_lines():
        print(line)
    print("desk-scale results (this run):")
    for row in result.summary:
        if row.label == "gap":
            print(f"  iter {row.iteration:>4}: dense-sparse gap {row.psnr_mean:+.2f} dB "
                  f"(std {row.psnr_std:.2f})")
    print(f"outputs: {paths['trace']}, {paths['summary']}, {paths['chart']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photosplat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic room dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--res", default="128x128")
    p.add_argument("--textureless", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("odometry", help="run photometric odometry over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-cloud", required=True)
    p.add_argument("--out-traj", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--dense", action="store_true", default=True)
    mode.add_argument("--tracking-only", action="store_true")
    p.set_defaults(func=_cmd_odometry)

    p = sub.add_parser("train", help="train a splat scene from a cloud and trajectory")
    p.add_argument("--data", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("compare", help="dense vs sparse initialization study")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", required=True, help="range '0..9' or list '0,1,2'")
    p.add_argument("--checkpoints", default=None, help="comma list of iterations")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall-clock column for byte-reproducible output")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrackingLostError as exc:
        print(f"tracking lost: {exc}", file=sys.stderr)
        return EXIT_TRACKING_LOST
    except (LoadError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidArgumentError, InsufficientTextureError) as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PhotosplatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
