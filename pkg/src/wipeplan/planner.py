"""Coverage planning: random set-cover sampling of waypoints, then 2-opt.

A cover set is grown by pressing at a random still-uncovered point until
every point of the object has been in contact at least once. Among
``n_sets`` such sets the one with the fewest waypoints is kept and ordered
into a short open path with best-improvement 2-opt.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from . import kernels
from .contact import GeometricPredictor, Predictor, SpongeModel, ToolPose, predict_contact
from .geometry import PointCloud
from .rng import stream

TWO_OPT_EPS = 1e-12
SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class WaypointSet:
    """An unordered set of poses whose predicted contacts cover the cloud."""

    poses: tuple
    covered: np.ndarray
    positions: np.ndarray

    def __len__(self):
        return len(self.poses)

    @property
    def complete(self) -> bool:
        return bool(self.covered.all())


@dataclass(frozen=True, eq=False)
class Trajectory:
    poses: tuple
    positions: np.ndarray
    path_length: float
    closed: bool = False
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.poses)

    def to_dict(self, cloud: PointCloud, config: "PlanConfig | None" = None):
        cfg = {}
        if config is not None:
            cfg = {"n_sets": config.n_sets, "seed": config.seed, "sponge": config.sponge.to_dict(), "closed": config.closed}
        waypoints = [
            {
                "index": p.contact_index,
                "position": [float(v) for v in cloud.points[p.contact_index]],
                "normal": [float(v) for v in cloud.normals[p.contact_index]],
                "theta": p.theta,
            }
            for p in self.poses
        ]
        return {
            "schema_version": SCHEMA_VERSION,
            "object": cloud.cloud_id,
            "cloud_fingerprint": cloud.fingerprint(),
            "config": cfg,
            "provenance": dict(self.provenance),
            "waypoints": waypoints,
            "path_length_m": self.path_length,
            "closed": self.closed,
        }

    @classmethod
    def from_dict(cls, d, cloud: PointCloud | None = None):
        poses = tuple(ToolPose(w["index"], w["theta"]) for w in d["waypoints"])
        if cloud is not None:
            for p in poses:
                p.check(cloud)
            positions = cloud.points[[p.contact_index for p in poses]] if poses else np.empty((0, 3))
        else:
            positions = np.array([w["position"] for w in d["waypoints"]], dtype=np.float64).reshape(-1, 3)
        closed = bool(d.get("closed", False))
        return cls(poses, positions, path_length(positions, closed), closed, dict(d.get("provenance", {})))


@dataclass(frozen=True)
class PlanConfig:
    n_sets: int = 50
    seed: int = 0
    sponge: SpongeModel = field(default_factory=SpongeModel)
    predictor: str = "geometric"
    closed: bool = False
    threads: int = 1

    def __post_init__(self):
        if int(self.n_sets) != self.n_sets or self.n_sets < 1:
            raise ValueError(f"n_sets must be an integer >= 1, got {self.n_sets}")
        if self.predictor != "geometric":
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def make_predictor(self) -> Predictor:
        return GeometricPredictor(self.sponge)


def path_length(positions, closed=False) -> float:
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(pos) < 2:
        return 0.0
    steps = np.diff(pos, axis=0)
    total = math.fsum(np.sqrt((steps * steps).sum(axis=1)))
    if closed:
        total += float(np.linalg.norm(pos[-1] - pos[0]))
    return float(total)


def sample_cover_set(cloud: PointCloud, predictor: Predictor, rng: np.random.Generator) -> WaypointSet:
    """Grow one cover set by pressing at random uncovered points.

    Contacts are always predicted on the full cloud; only the pool the next
    contact is drawn from shrinks. Every press covers its own contact point,
    so at most ``cloud.count`` presses are made.
    """
    remaining = np.ones(cloud.count, dtype=bool)
    covered = np.zeros(cloud.count, dtype=bool)
    poses = []
    for _ in range(cloud.count):
        pool = np.flatnonzero(remaining)
        if pool.size == 0:
            break
        idx = int(pool[rng.integers(pool.size)])
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        pose = ToolPose(idx, theta)
        cmap = predict_contact(predictor, cloud, pose)
        poses.append(pose)
        covered |= cmap.mask
        remaining &= ~cmap.mask
    if remaining.any():
        raise RuntimeError("cover sampling did not terminate; predictor ignored its contact point")
    positions = cloud.points[[p.contact_index for p in poses]]
    covered.setflags(write=False)
    return WaypointSet(tuple(poses), covered, positions)


def sample_cover_sets(cloud: PointCloud, predictor: Predictor, config: PlanConfig) -> list:
    """``config.n_sets`` independent cover sets, in set-index order."""

    def one(j):
        return sample_cover_set(cloud, predictor, stream(config.seed, "cover-set", j))

    if config.threads > 1 and config.n_sets > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(one, range(config.n_sets)))
    return [one(j) for j in range(config.n_sets)]


def spanning_length(positions) -> float:
    """Minimum spanning tree weight: a lower bound on any path through them."""
    pos = np.asarray(positions, dtype=np.float64)
    if len(pos) < 2:
        return 0.0
    D = cdist(pos, pos)
    # csgraph treats zeros as missing edges; duplicates contribute nothing anyway.
    return float(minimum_spanning_tree(D).sum())


def select_best_set(sets) -> WaypointSet:
    """Fewest waypoints; ties by smaller spanning-tree bound, then lower index."""
    if not sets:
        raise ValueError("no waypoint sets to choose from")
    keys = [(len(s), spanning_length(s.positions), j) for j, s in enumerate(sets)]
    return sets[min(keys)[2]]


def nearest_neighbour_order(D, start) -> np.ndarray:
    n = len(D)
    order = [int(start)]
    free = np.ones(n, dtype=bool)
    free[start] = False
    for _ in range(n - 1):
        row = np.where(free, D[order[-1]], np.inf)
        nxt = int(np.argmin(row))
        order.append(nxt)
        free[nxt] = False
    return np.array(order, dtype=np.intp)


def solve_tsp_2opt(poses, positions, *, start_point=None, closed=False, return_initial=False):
    """Order ``poses`` into a short path over their contact positions.

    The initial tour is nearest-neighbour starting from the pose closest to
    ``start_point`` (default: the positions' mean), improved by
    best-improvement 2-opt until no reversal gains more than 1e-12 m.
    """
    poses = tuple(poses)
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(poses) != len(pos):
        raise ValueError("poses and positions differ in length")
    if not poses:
        raise ValueError("need at least one pose")
    ref = pos.mean(axis=0) if start_point is None else np.asarray(start_point, dtype=np.float64)
    start = int(np.argmin(np.sqrt(((pos - ref) ** 2).sum(axis=1))))
    D = cdist(pos, pos)
    initial = nearest_neighbour_order(D, start)
    order, moves = kernels.two_opt(D, initial, closed, TWO_OPT_EPS)
    order = np.asarray(order, dtype=np.intp)
    traj = Trajectory(
        tuple(poses[i] for i in order),
        pos[order],
        path_length(pos[order], closed),
        closed,
        {"two_opt_moves": int(moves)},
    )
    if return_initial:
        return traj, path_length(pos[initial], closed)
    return traj


def plan(cloud: PointCloud, config: PlanConfig | None = None, predictor: Predictor | None = None) -> Trajectory:
    """Sample cover sets, keep the smallest, and sequence it with 2-opt."""
    config = config or PlanConfig()
    predictor = predictor or config.make_predictor()
    sets = sample_cover_sets(cloud, predictor, config)
    best = select_best_set(sets)
    traj = solve_tsp_2opt(best.poses, best.positions, start_point=cloud.centroid, closed=config.closed)
    provenance = {
        "seed": config.seed,
        "n_sets": config.n_sets,
        "predictor": getattr(predictor, "predictor_id", type(predictor).__name__),
        "set_sizes": [len(s) for s in sets],
        "selected_set": sets.index(best),
        "two_opt_moves": traj.provenance["two_opt_moves"],
    }
    return replace(traj, provenance=provenance)
