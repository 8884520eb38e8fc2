"""Quasi-static press of a deformable sponge and contact-map labelling.

The sponge's bottom face is a grid of independent compressive springs (an
elastic foundation). A press places the grid on the tangent plane at the
contact point, rotated by the yaw angle, and pushes it along the inward
normal until the summed spring force reaches the target. Points of the
object near the nodes that carry enough force are labelled as in contact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from functools import cached_property
from typing import Protocol

import numpy as np

from . import kernels
from .geometry import PointCloud, SpatialIndex

RIGID_YOUNGS_MODULUS = 2e9
SOURCES = ("ground_truth", "predicted")
FORCE_TOLERANCE = 1e-3
DEPTH_TOLERANCE = 1e-6
MAX_BISECTION_STEPS = 60
_NEIGHBOURS = 4


@dataclass(frozen=True)
class SpongeModel:
    """Deformable tool parameters. Lengths in metres, forces in newtons.

    ``reference_node_count`` sets the mesh resolution at which nodal forces
    are compared with ``node_force_threshold``: the per-node spring forces
    of the (finer) simulation grid are scaled by
    ``grid_nx * grid_ny / reference_node_count`` before thresholding, so the
    threshold keeps its meaning when the grid is refined.
    """

    width: float = 0.05
    length: float = 0.05
    height: float = 0.02
    youngs_modulus: float = 1e4
    grid_nx: int = 9
    grid_ny: int = 9
    target_force: float = 5.0
    node_force_threshold: float = 0.5
    label_radius: float = 0.005
    reference_node_count: int = 4

    def __post_init__(self):
        for name in ("width", "length", "height", "youngs_modulus", "label_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if int(self.grid_nx) != self.grid_nx or int(self.grid_ny) != self.grid_ny or min(self.grid_nx, self.grid_ny) < 2:
            raise ValueError(f"grid must be integers >= 2, got {self.grid_nx}x{self.grid_ny}")
        if not self.target_force > self.node_force_threshold > 0:
            raise ValueError("need target_force > node_force_threshold > 0")
        if int(self.reference_node_count) != self.reference_node_count or self.reference_node_count < 1:
            raise ValueError(f"reference_node_count must be a positive integer, got {self.reference_node_count}")

    @property
    def node_count(self) -> int:
        return self.grid_nx * self.grid_ny

    @property
    def cell_area(self) -> float:
        return self.width * self.length / self.node_count

    @property
    def node_stiffness(self) -> float:
        """Spring constant of one node, N/m."""
        return self.youngs_modulus * self.cell_area / self.height

    @property
    def overhang_distance(self) -> float:
        return 2.0 * max(self.width, self.length) / self.grid_nx

    @cached_property
    def grid_offsets(self):
        """Node offsets along the tool x and y axes, flattened row-major."""
        u = np.linspace(-0.5 * self.width, 0.5 * self.width, self.grid_nx)
        v = np.linspace(-0.5 * self.length, 0.5 * self.length, self.grid_ny)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        uu, vv = uu.reshape(-1), vv.reshape(-1)
        uu.setflags(write=False)
        vv.setflags(write=False)
        return uu, vv

    def lumped_forces(self, node_forces):
        return np.asarray(node_forces) * (self.node_count / self.reference_node_count)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def rigid_variant(sponge: SpongeModel) -> SpongeModel:
    """Same tool with a steel-like Young's modulus of 2e9 Pa."""
    return replace(sponge, youngs_modulus=RIGID_YOUNGS_MODULUS)


@dataclass(frozen=True)
class ToolPose:
    """Contact at ``cloud.points[contact_index]`` with yaw ``theta`` about the normal."""

    contact_index: int
    theta: float = 0.0

    def __post_init__(self):
        if int(self.contact_index) != self.contact_index or self.contact_index < 0:
            raise ValueError(f"contact_index must be a non-negative integer, got {self.contact_index}")
        t = math.fmod(float(self.theta), 2.0 * math.pi)
        if t < 0:
            t += 2.0 * math.pi
        if t >= 2.0 * math.pi:
            t = 0.0
        object.__setattr__(self, "contact_index", int(self.contact_index))
        object.__setattr__(self, "theta", t)

    @property
    def feature(self):
        return (math.sin(self.theta), math.cos(self.theta))

    def contact_point(self, cloud):
        return cloud.points[self.contact_index]

    def approach_axis(self, cloud):
        return -cloud.normals[self.contact_index]

    def check(self, cloud):
        if self.contact_index >= cloud.count:
            raise IndexError(f"contact_index {self.contact_index} out of range for {cloud.count} points")

    def to_dict(self):
        return {"index": self.contact_index, "theta": self.theta}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["index"]), float(d["theta"]))


def tool_axes(normal, theta):
    """Tool x and y axes for a pose; the tool z axis is ``normal``.

    The reference tangent is global +x projected onto the tangent plane, or
    +y when the normal is (anti)parallel to x.
    """
    nx, ny, nz = (float(c) for c in normal)
    if abs(abs(nx) - 1.0) <= 1e-6:
        tx, ty, tz = -ny * nx, 1.0 - ny * ny, -ny * nz
    else:
        tx, ty, tz = 1.0 - nx * nx, -nx * ny, -nx * nz
    norm = math.sqrt(tx * tx + ty * ty + tz * tz)
    tx, ty, tz = tx / norm, ty / norm, tz / norm
    bx, by, bz = ny * tz - nz * ty, nz * tx - nx * tz, nx * ty - ny * tx
    c, s = math.cos(theta), math.sin(theta)
    x = np.array([c * tx + s * bx, c * ty + s * by, c * tz + s * bz])
    y = np.array([ny * x[2] - nz * x[1], nz * x[0] - nx * x[2], nx * x[1] - ny * x[0]])
    return x, y


@dataclass(frozen=True, eq=False)
class PressResult:
    pose: ToolPose
    node_positions: np.ndarray  # (grid_nx, grid_ny, 3), deformed bottom face
    node_forces: np.ndarray  # (grid_nx, grid_ny), newtons
    press_depth: float
    net_force: float
    target_force: float
    force_unreached: bool
    iterations: int


def press(sponge: SpongeModel, cloud: PointCloud, index: SpatialIndex, pose: ToolPose, *, target_force=None) -> PressResult:
    """Push the sponge into the surface at ``pose`` until the force balances.

    ``press_depth`` is the displacement of the undeformed bottom face below
    the contact point along the approach axis; it is negative when the
    surface rises around the contact (inside a bowl) and the target force
    is met before the contact point itself is reached.
    """
    pose.check(cloud)
    target = sponge.target_force if target_force is None else float(target_force)
    pc = cloud.points[pose.contact_index]
    normal = cloud.normals[pose.contact_index]
    x, y = tool_axes(normal, pose.theta)

    u, v = sponge.grid_offsets
    lateral = pc + u[:, None] * x + v[:, None] * y

    _, nbrs = index.knn_batch(lateral, min(_NEIGHBOURS, cloud.count))
    nbrs = np.ascontiguousarray(nbrs, dtype=np.intp)
    hs, supported = kernels.node_heights(cloud.points, nbrs, lateral, pc, normal, sponge.overhang_distance)
    k_node = sponge.node_stiffness
    depth, _, iters, reached = kernels.solve_depth(
        hs, supported, k_node, target, sponge.height, FORCE_TOLERANCE, DEPTH_TOLERANCE, MAX_BISECTION_STEPS
    )
    penetration = np.where(supported, np.maximum(hs + depth, 0.0), 0.0)
    forces = k_node * penetration
    # Compressed nodes sit on the surface; the rest stay on the tool plane.
    offset = np.where(penetration > 0, hs, -depth)
    positions = lateral + offset[:, None] * normal
    shape = (sponge.grid_nx, sponge.grid_ny)
    forces = forces.reshape(shape)
    forces.setflags(write=False)
    positions = positions.reshape(shape + (3,))
    positions.setflags(write=False)
    return PressResult(
        pose=pose,
        node_positions=positions,
        node_forces=forces,
        press_depth=float(depth),
        net_force=float(forces.sum()),
        target_force=target,
        force_unreached=not reached,
        iterations=int(iters),
    )


@dataclass(frozen=True, eq=False)
class ContactMap:
    """Boolean per-point contact labels over one point cloud."""

    mask: np.ndarray
    source: str
    pose: ToolPose | None = None
    cloud_id: str = ""

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        m = np.array(self.mask, dtype=bool, copy=True).reshape(-1)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other):
        if not isinstance(other, ContactMap):
            return NotImplemented
        return (
            self.source == other.source
            and self.pose == other.pose
            and self.cloud_id == other.cloud_id
            and np.array_equal(self.mask, other.mask)
        )

    def with_source(self, source):
        return replace(self, source=source)

    def to_dict(self):
        return {
            "schema_version": 1,
            "cloud_id": self.cloud_id,
            "pose": self.pose.to_dict() if self.pose is not None else None,
            "mask": rle_encode(self.mask),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d):
        pose = ToolPose.from_dict(d["pose"]) if d.get("pose") is not None else None
        return cls(rle_decode(d["mask"]), d["source"], pose, d.get("cloud_id", ""))


def rle_encode(mask) -> dict:
    """Run lengths of alternating values, starting with ``first``."""
    m = np.asarray(mask, dtype=bool).reshape(-1)
    if m.size == 0:
        return {"length": 0, "first": False, "runs": []}
    edges = np.flatnonzero(m[1:] != m[:-1]) + 1
    bounds = np.concatenate([[0], edges, [m.size]])
    return {"length": int(m.size), "first": bool(m[0]), "runs": np.diff(bounds).astype(int).tolist()}


def rle_decode(d) -> np.ndarray:
    runs = [int(r) for r in d["runs"]]
    if any(r <= 0 for r in runs) or sum(runs) != int(d["length"]):
        raise ValueError("run lengths must be positive and sum to length")
    values = np.arange(len(runs)) % 2 == (0 if d["first"] else 1)
    return np.repeat(values, runs).astype(bool)


def label_contact(result: PressResult, sponge: SpongeModel, cloud: PointCloud, index: SpatialIndex) -> ContactMap:
    """Ground-truth labels from a press.

    Nodes whose lumped force exceeds the threshold are contact nodes; every
    object point within ``label_radius`` of a contact node is in contact.
    The press's own contact point is always included.
    """
    mask = np.zeros(cloud.count, dtype=bool)
    in_contact = sponge.lumped_forces(result.node_forces) > sponge.node_force_threshold
    if in_contact.any():
        pc = cloud.points[result.pose.contact_index]
        cpos = np.ascontiguousarray(result.node_positions[in_contact])
        reach = float(np.sqrt(((cpos - pc) ** 2).sum(axis=1)).max()) + sponge.label_radius
        cand = index.radius_query(pc, reach)
        if cand.size:
            hit = kernels.label_mask(np.ascontiguousarray(cloud.points[cand]), cpos, sponge.label_radius)
            mask[cand[hit]] = True
    mask[result.pose.contact_index] = True
    return ContactMap(mask, "ground_truth", result.pose, cloud.cloud_id)


class Predictor(Protocol):
    """Anything mapping (cloud, pose) to a ContactMap deterministically."""

    def __call__(self, cloud: PointCloud, pose: ToolPose) -> ContactMap: ...


class GeometricPredictor:
    """Press-and-label composed into a predictor."""

    def __init__(self, sponge: SpongeModel | None = None):
        self.sponge = sponge or SpongeModel()

    @property
    def predictor_id(self) -> str:
        s = self.sponge
        return f"geometric-press(E={s.youngs_modulus:g},grid={s.grid_nx}x{s.grid_ny})"

    def press(self, cloud, pose, **kw) -> PressResult:
        return press(self.sponge, cloud, cloud.spatial_index, pose, **kw)

    def __call__(self, cloud, pose):
        result = self.press(cloud, pose)
        return label_contact(result, self.sponge, cloud, cloud.spatial_index).with_source("predicted")

    def __repr__(self):
        return f"GeometricPredictor({self.sponge!r})"


def predict_contact(predictor: Predictor, cloud: PointCloud, pose: ToolPose) -> ContactMap:
    pose.check(cloud)
    out = predictor(cloud, pose)
    if len(out.mask) != cloud.count:
        raise ValueError(f"predictor returned {len(out.mask)} labels for {cloud.count} points")
    return out if out.source == "predicted" else out.with_source("predicted")
