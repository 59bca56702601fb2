"""Dense-vs-sparse initialization comparison.

Per seed: run odometry once, build the dense cloud (tracking + extra + fill)
and the sparse baseline from the very same run, then train two splat scenes
from identical poses, views, and configuration; only the initial cloud
differs. PSNR is measured on held-out views (every eval_every-th frame is
excluded from training) at the checkpoint iterations. Seeds are independent
jobs, so any worker count yields identical results.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..camera import PinholeCamera
from ..errors import InvalidArgumentError
from ..odometry import OdometryConfig, PointStatus, frames_from_arrays, run_odometry
from ..pointcloud import PointCloud, export_point_cloud
from ..se3 import Se3Pose
from ..splat.densify import densify_and_prune
from ..splat.metrics import psnr
from ..splat.model import SplatScene, init_from_point_cloud
from ..splat.optim import TrainConfig, TrainerState, train_step
from ..splat.render import render
from .baseline import make_sparse_baseline
from .dataset import LoadedDataset
from .synthetic import SceneConfig, SyntheticScene, generate_synthetic_scene

DEFAULT_CHECKPOINTS = (10, 15, 20, 30, 40, 60, 80, 120, 160, 240, 320, 480, 640)


@dataclass(frozen=True)
class CompareConfig:
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    eval_every: int = 5
    dense_points: str = "dense"  # "dense" (tracking+extra+fill) or "tracking-only"
    baseline_mode: str = "tracking-only"
    baseline_ratio: float | None = None
    record_timing: bool = True
    workers: int = 1
    dense_label: str = "dense"
    sparse_label: str = "sparse"

    def __post_init__(self):
        if not self.checkpoints or any(c < 1 for c in self.checkpoints):
            raise InvalidArgumentError("checkpoints must be positive iterations")
        if tuple(sorted(self.checkpoints)) != tuple(self.checkpoints):
            raise InvalidArgumentError("checkpoints must be strictly increasing")
        if self.eval_every < 2:
            raise InvalidArgumentError("eval_every must be at least 2")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be at least 1")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    psnr: float
    loss: float
    count: int
    ms: float | None


@dataclass
class TrainingTrace:
    label: str
    seed: int
    records: list[TraceRecord] = field(default_factory=list)


@dataclass
class SeedRun:
    seed: int
    dense: TrainingTrace
    sparse: TrainingTrace
    shared_hash_dense: str
    shared_hash_sparse: str
    train_view_ids: tuple[int, ...]
    eval_view_ids: tuple[int, ...]
    dense_cloud_size: int
    sparse_cloud_size: int


@dataclass(frozen=True)
class SummaryRow:
    label: str
    iteration: int
    psnr_mean: float
    psnr_std: float
    loss_mean: float | None
    count_mean: float | None


@dataclass
class ComparisonResult:
    runs: list[SeedRun]
    summary: list[SummaryRow]
    record_timing: bool

    @property
    def traces(self) -> list[TrainingTrace]:
        out = []
        for run in self.runs:
            out.append(run.dense)
            out.append(run.sparse)
        return out


def robust_extent(positions: np.ndarray) -> float:
    """Outlier-resistant scene extent: 2nd..98th percentile bounding-box diagonal."""
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(p) < 2:
        return 1.0
    lo = np.percentile(p, 2.0, axis=0)
    hi = np.percentile(p, 98.0, axis=0)
    diag = float(np.linalg.norm(hi - lo))
    return diag if diag > 0 else 1.0


def _shared_input_hash(poses, camera: PinholeCamera, train_cfg: TrainConfig,
                       train_ids, eval_ids, seed: int) -> str:
    h = hashlib.sha256()
    for p in poses:
        h.update(p.rotation.tobytes())
        h.update(p.translation.tobytes())
    h.update(json.dumps([camera.fx, camera.fy, camera.cx, camera.cy,
                         camera.width, camera.height]).encode())
    h.update(repr(train_cfg).encode())
    h.update(json.dumps([sorted(train_ids), sorted(eval_ids), seed]).encode())
    return h.hexdigest()


def train_with_trace(
    cloud: PointCloud,
    images: np.ndarray,
    poses: list[Se3Pose],
    camera: PinholeCamera,
    train_cfg: TrainConfig,
    checkpoints: tuple[int, ...],
    eval_ids: tuple[int, ...],
    seed: int,
    label: str,
    record_timing: bool = True,
    scene_extent: float | None = None,
) -> tuple[TrainingTrace, SplatScene, str]:
    """Train one arm, recording PSNR on the held-out views at each checkpoint.

    `scene_extent`, when given, overrides the per-cloud extent so both arms
    share learning rates and densification thresholds.
    """
    eval_set = set(eval_ids)
    train_ids = [i for i in range(len(images)) if i not in eval_set]
    if not train_ids:
        raise InvalidArgumentError("no training views left after the eval split")
    shared = _shared_input_hash(poses, camera, train_cfg, train_ids, eval_ids, seed)

    scene = init_from_point_cloud(cloud, scene_extent_hint=scene_extent)
    state = TrainerState(scene)
    rng = np.random.Generator(np.random.PCG64(seed))
    order: list[int] = []
    trace = TrainingTrace(label=label, seed=seed)
    elapsed = 0.0
    total_iters = max(checkpoints)
    loss = float("nan")
    for it in range(1, total_iters + 1):
        if not order:
            order = [train_ids[k] for k in rng.permutation(len(train_ids))]
        view = order.pop()
        assert view not in eval_set, "held-out view leaked into training"
        t0 = time.perf_counter()
        loss = train_step(scene, images[view], camera, poses[view], state, train_cfg)
        if it % train_cfg.densify_interval == 0 and it < total_iters:
            densify_and_prune(scene, state, train_cfg)
        elapsed += (time.perf_counter() - t0) * 1000.0
        if it in checkpoints:
            values = []
            for ev in eval_ids:
                rendered, _ = render(scene, camera, poses[ev])
                values.append(psnr(rendered, images[ev]))
            mean_psnr = float(np.mean(values)) if values else float("nan")
            trace.records.append(
                TraceRecord(
                    iteration=it,
                    psnr=mean_psnr,
                    loss=float(loss),
                    count=len(scene),
                    ms=elapsed if record_timing else None,
                )
            )
    return trace, scene, shared


def _resolve_source(source, seed: int):
    """Returns (images (N,H,W,3), camera, bootstrap_depth or None)."""
    if isinstance(source, SceneConfig):
        scene = generate_synthetic_scene(seed, source)
        return scene.images, scene.camera, scene.depths[0]
    if isinstance(source, SyntheticScene):
        return source.images, source.camera, source.depths[0]
    if isinstance(source, LoadedDataset):
        return np.stack(source.colors), source.camera, None
    raise InvalidArgumentError(f"unsupported comparison source: {type(source)!r}")


def run_seed(
    source,
    seed: int,
    train_cfg: TrainConfig,
    cmp_cfg: CompareConfig,
    odo_cfg: OdometryConfig,
) -> SeedRun:
    images, camera, bootstrap = _resolve_source(source, seed)
    frames = frames_from_arrays(images)
    odo = run_odometry(frames, camera, odo_cfg, bootstrap_depth=bootstrap)
    frame_map = {f.id: f for f in odo.frames}

    if cmp_cfg.dense_points == "dense":
        dense_points = odo.cloud
    elif cmp_cfg.dense_points == "tracking-only":
        dense_points = [p for p in odo.cloud if p.status == PointStatus.POSE_TRACKING]
    else:
        raise InvalidArgumentError(f"unknown dense_points mode {cmp_cfg.dense_points!r}")
    sparse_points = make_sparse_baseline(
        dense_points, cmp_cfg.baseline_mode, ratio=cmp_cfg.baseline_ratio, seed=seed
    )
    dense_cloud = export_point_cloud(dense_points, camera, frame_map)
    sparse_cloud = export_point_cloud(sparse_points, camera, frame_map)
    extent = robust_extent(dense_cloud.positions)

    poses = odo.frame_poses
    n = len(images)
    eval_ids = tuple(i for i in range(n) if i % cmp_cfg.eval_every == 0)
    dense_trace, _, hash_dense = train_with_trace(
        dense_cloud, images, poses, camera, train_cfg, cmp_cfg.checkpoints,
        eval_ids, seed, cmp_cfg.dense_label, cmp_cfg.record_timing, scene_extent=extent,
    )
    sparse_trace, _, hash_sparse = train_with_trace(
        sparse_cloud, images, poses, camera, train_cfg, cmp_cfg.checkpoints,
        eval_ids, seed, cmp_cfg.sparse_label, cmp_cfg.record_timing, scene_extent=extent,
    )
    if hash_dense != hash_sparse:
        raise InvalidArgumentError("comparison arms received different shared inputs")
    train_ids = tuple(i for i in range(n) if i not in set(eval_ids))
    return SeedRun(
        seed=seed,
        dense=dense_trace,
        sparse=sparse_trace,
        shared_hash_dense=hash_dense,
        shared_hash_sparse=hash_sparse,
        train_view_ids=train_ids,
        eval_view_ids=eval_ids,
        dense_cloud_size=len(dense_cloud),
        sparse_cloud_size=len(sparse_cloud),
    )


def _seed_job(payload):
    source, seed, train_cfg, cmp_cfg, odo_cfg = payload
    return run_seed(source, seed, train_cfg, cmp_cfg, odo_cfg)


def run_comparison(
    source,
    seeds,
    train_config: TrainConfig | None = None,
    compare_config: CompareConfig | None = None,
    odometry_config: OdometryConfig | None = None,
) -> ComparisonResult:
    seeds = list(seeds)
    if not seeds:
        raise InvalidArgumentError("at least one seed is required")
    train_cfg = train_config or TrainConfig()
    cmp_cfg = compare_config or CompareConfig()
    odo_cfg = odometry_config or OdometryConfig()

    payloads = [(source, s, train_cfg, cmp_cfg, odo_cfg) for s in seeds]
    if cmp_cfg.workers == 1 or len(seeds) == 1:
        runs = [_seed_job(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=cmp_cfg.workers) as pool:
            runs = list(pool.map(_seed_job, payloads))

    summary = summarize(runs, cmp_cfg)
    return ComparisonResult(runs=runs, summary=summary, record_timing=cmp_cfg.record_timing)


def summarize(runs: list[SeedRun], cmp_cfg: CompareConfig) -> list[SummaryRow]:
    rows: list[SummaryRow] = []
    checkpoints = cmp_cfg.checkpoints
    by_label = {cmp_cfg.dense_label: [r.dense for r in runs],
                cmp_cfg.sparse_label: [r.sparse for r in runs]}
    for label, traces in by_label.items():
        for ci, it in enumerate(checkpoints):
            vals = np.array([t.records[ci].psnr for t in traces])
            losses = np.array([t.records[ci].loss for t in traces])
            counts = np.array([t.records[ci].count for t in traces])
            rows.append(
                SummaryRow(
                    label=label, iteration=it,
                    psnr_mean=float(vals.mean()), psnr_std=float(vals.std()),
                    loss_mean=float(losses.mean()), count_mean=float(counts.mean()),
                )
            )
    for ci, it in enumerate(checkpoints):
        gaps = np.array(
            [r.dense.records[ci].psnr - r.sparse.records[ci].psnr for r in runs]
        )
        rows.append(
            SummaryRow(
                label="gap", iteration=it,
                psnr_mean=float(gaps.mean()), psnr_std=float(gaps.std()),
                loss_mean=None, count_mean=None,
            )
        )
    return rows
