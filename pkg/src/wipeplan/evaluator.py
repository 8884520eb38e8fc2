"""Replaying trajectories, coverage metrics and the benchmark harness."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .contact import ContactMap, SpongeModel, ToolPose, label_contact, press
from .geometry import ObjectSpec, PointCloud, generate_object
from .planner import PlanConfig, Trajectory, plan
from .rng import stream

BENCHMARK_HEADER = ("object", "trial", "coverage_percent", "waypoints", "path_length_m")
SUMMARY_HEADER = ("object", "coverage_percent", "waypoints", "path_length_m")


@dataclass(frozen=True)
class NoiseModel:
    """Execution errors: Gaussian contact-point offset and under-forced presses."""

    position_sigma: float = 0.0
    force_deficit_prob: float = 0.0
    seed: int = 0
    deficit_factor: float = 0.6

    def __post_init__(self):
        if not self.position_sigma >= 0:
            raise ValueError(f"position_sigma must be >= 0, got {self.position_sigma}")
        if not 0 <= self.force_deficit_prob <= 1:
            raise ValueError(f"force_deficit_prob must be in [0, 1], got {self.force_deficit_prob}")
        if not 0 < self.deficit_factor <= 1:
            raise ValueError(f"deficit_factor must be in (0, 1], got {self.deficit_factor}")

    @property
    def is_zero(self):
        return self.position_sigma == 0 and self.force_deficit_prob == 0


@dataclass(frozen=True, eq=False)
class CoverageReport:
    coverage_percent: float
    waypoint_count: int
    path_length: float
    per_waypoint_counts: tuple
    masks: tuple = field(repr=False)
    executed_poses: tuple = field(repr=False, default=())
    flags: tuple = ()

    def recompute_coverage(self, n_points) -> float:
        union = np.zeros(n_points, dtype=bool)
        for m in self.masks:
            union |= m
        return 100.0 * int(union.sum()) / n_points


def execute_and_evaluate(cloud: PointCloud, trajectory, sponge: SpongeModel, noise: NoiseModel | None = None) -> CoverageReport:
    """Press at every waypoint in order and measure the union of contacts.

    With noise, each contact point is displaced by isotropic Gaussian noise
    and snapped to the nearest cloud point, and with probability
    ``force_deficit_prob`` the press only reaches ``deficit_factor`` of the
    target force. Contacts are labelled exactly as in data generation.
    """
    noise = noise or NoiseModel()
    poses = tuple(trajectory.poses) if isinstance(trajectory, Trajectory) else tuple(trajectory)
    rng = stream(noise.seed, "execute")
    index = cloud.spatial_index
    union = np.zeros(cloud.count, dtype=bool)
    masks, counts, executed, flags = [], [], [], []
    for k, pose in enumerate(poses):
        pose.check(cloud)
        offset = rng.normal(0.0, 1.0, 3) * noise.position_sigma
        deficit = rng.random() < noise.force_deficit_prob
        if noise.position_sigma > 0:
            target = cloud.points[pose.contact_index] + offset
            idx = int(index.knn(target, 1)[0])
            pose = ToolPose(idx, pose.theta)
        force = sponge.target_force * (noise.deficit_factor if deficit else 1.0)
        result = press(sponge, cloud, index, pose, target_force=force)
        cmap = label_contact(result, sponge, cloud, index)
        if result.force_unreached:
            flags.append(f"waypoint {k}: force_unreached")
        if deficit:
            flags.append(f"waypoint {k}: force_deficit")
        masks.append(cmap.mask)
        counts.append(cmap.count)
        executed.append(pose)
        union |= cmap.mask
    positions = cloud.points[[p.contact_index for p in poses]] if poses else np.empty((0, 3))
    steps = np.diff(positions, axis=0)
    length = math.fsum(np.sqrt((steps * steps).sum(axis=1))) if len(poses) > 1 else 0.0
    return CoverageReport(
        coverage_percent=100.0 * int(union.sum()) / cloud.count,
        waypoint_count=len(poses),
        path_length=float(length),
        per_waypoint_counts=tuple(counts),
        masks=tuple(masks),
        executed_poses=tuple(executed),
        flags=tuple(flags),
    )


def f1_contact(predicted: ContactMap, truth: ContactMap) -> dict:
    """Per-point precision, recall and F1 of ``predicted`` against ``truth``."""
    p = np.asarray(predicted.mask, dtype=bool)
    t = np.asarray(truth.mask, dtype=bool)
    if p.shape != t.shape:
        raise ValueError(f"mask lengths differ: {p.size} vs {t.size}")
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    if tp + fp + fn == 0:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn)
    return {"precision": precision, "recall": recall, "f1": f1}


def pixel_coverage(n_before, n_after) -> float:
    """Percentage of marked pixels removed: ``(1 - n_after / n_before) * 100``.

    More pixels after than before gives a negative value (with a warning)
    rather than being clamped.
    """
    if not n_before > 0:
        raise ValueError(f"n_before must be > 0, got {n_before}")
    if n_after < 0:
        raise ValueError(f"n_after must be >= 0, got {n_after}")
    if n_after > n_before:
        warnings.warn(f"n_after ({n_after}) exceeds n_before ({n_before}); coverage is negative", stacklevel=2)
    return (1.0 - n_after / n_before) * 100.0


@dataclass
class BenchmarkResult:
    rows: list  # (object, trial, coverage_percent, waypoints, path_length_m)
    summary: list  # (object, mean coverage, mean waypoints, mean path length), last row "All"

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BENCHMARK_HEADER)
        for obj, trial, cov, wp, length in self.rows:
            w.writerow([obj, trial, _fmt(cov), wp, _fmt(length)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for obj, cov, wp, length in self.summary:
            w.writerow([obj, _fmt(cov), _fmt(wp), _fmt(length)])
        return buf.getvalue()

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.csv").write_text(self.rows_csv(), encoding="utf-8")
        (out / "summary.csv").write_text(self.summary_csv(), encoding="utf-8")
        return out

    def mean_coverage(self, obj="All"):
        return next(r[1] for r in self.summary if r[0] == obj)


def _fmt(x):
    return f"{x:.6f}"


def benchmark(specs, trials: int, config: PlanConfig | None = None, noise: NoiseModel | None = None, *, progress=None) -> BenchmarkResult:
    """Plan and execute ``trials`` times per object; per-object means plus an All row.

    Each trial re-seeds the planner and the executor from ``config.seed``,
    the object index and the trial index.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = config or PlanConfig()
    noise = noise or NoiseModel()
    rows, summary = [], []
    for oi, spec in enumerate(specs):
        spec = spec if isinstance(spec, ObjectSpec) else ObjectSpec.from_dict(spec)
        cloud = generate_object(spec)
        per = []
        for t in range(trials):
            plan_seed = int(stream(config.seed, "benchmark-plan", oi, t).integers(2**63))
            noise_seed = int(stream(noise.seed, "benchmark-noise", oi, t).integers(2**63))
            traj = plan(cloud, replace(config, seed=plan_seed))
            report = execute_and_evaluate(cloud, traj, config.sponge, replace(noise, seed=noise_seed))
            row = (spec.object_id, t, report.coverage_percent, report.waypoint_count, traj.path_length)
            rows.append(row)
            per.append(row)
            if progress:
                progress(row)
        summary.append(
            (spec.object_id, float(np.mean([r[2] for r in per])), float(np.mean([r[3] for r in per])), float(np.mean([r[4] for r in per])))
        )
    summary.append(
        ("All", float(np.mean([s[1] for s in summary])), float(np.mean([s[2] for s in summary])), float(np.mean([s[3] for s in summary])))
    )
    return BenchmarkResult(rows, summary)
