"""Point clouds, spatial queries, normal estimation and synthetic dishes.

Synthetic objects are surfaces of revolution so that every sample lies
exactly on a known profile and carries an analytic normal. Normals are
always oriented into the upper hemisphere (the tool comes from above).
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

OBJECT_KINDS = ("plate", "bowl", "pan")
# Plate rims start at this fraction of the radius.
PLATE_WELL_FRACTION = 0.7
_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
_PROFILE_SAMPLES = 8192


class DegenerateNormalWarning(UserWarning):
    """Some neighbourhoods were too degenerate to fit a plane."""

    def __init__(self, count):
        super().__init__(f"{count} degenerate neighbourhood(s); normal set to (0, 0, 1)")
        self.count = count


def _distances(points, p):
    # Fixed summation order so every backend agrees to the last bit.
    d = points - p
    return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Positions (metres) and unit normals of a rigid target surface."""

    points: np.ndarray
    normals: np.ndarray
    cloud_id: str = ""

    def __post_init__(self):
        pts = _readonly(self.points, np.float64)
        nrm = _readonly(self.normals, np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if nrm.shape != pts.shape:
            raise ValueError(f"normals shape {nrm.shape} does not match points {pts.shape}")
        if len(pts) < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(nrm)):
            raise ValueError("non-finite coordinates")
        lengths = np.linalg.norm(nrm, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-6):
            bad = int(np.argmax(np.abs(lengths - 1.0)))
            raise ValueError(f"normal {bad} has length {lengths[bad]:.9f}, expected 1")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("point cloud contains duplicate points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)

    @property
    def count(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)

    @cached_property
    def spatial_index(self) -> "SpatialIndex":
        return SpatialIndex(self.points)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def fingerprint(self) -> str:
        """Short content hash, stable across runs and platforms."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.normals, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


class SpatialIndex:
    """k-nearest-neighbour and radius queries over a fixed set of points.

    Backed by ``scipy.spatial.cKDTree``; results are post-filtered with an
    explicit Euclidean distance so the documented boundary and tie rules
    hold exactly.
    """

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def radius_query(self, p, r) -> np.ndarray:
        """Sorted indices ``i`` with ``|points[i] - p| <= r``."""
        p = np.asarray(p, dtype=np.float64)
        if r < 0:
            return np.empty(0, dtype=np.intp)
        cand = self._tree.query_ball_point(p, r * (1.0 + 1e-9) + 1e-300, return_sorted=False)
        return kernels.ball_filter(self.points, cand, p, float(r))

    def knn(self, p, k) -> np.ndarray:
        """``k`` nearest indices by ascending distance, ties by ascending index."""
        p = np.asarray(p, dtype=np.float64)
        n = len(self.points)
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
        dk, _ = self._tree.query(p, k=k)
        kth = float(np.atleast_1d(dk)[-1])
        # Everything tied with the k-th distance must compete on index.
        cand = self.radius_query(p, kth * (1.0 + 1e-12))
        d = _distances(self.points[cand], p)
        order = np.lexsort((cand, d))
        return cand[order[:k]]

    def knn_batch(self, queries, k):
        """Vectorised k-NN (distances, indices); ties unspecified."""
        d, i = self._tree.query(np.asarray(queries, dtype=np.float64), k=k)
        return d.reshape(len(queries), k), i.reshape(len(queries), k)

    def ball_batch(self, queries, r):
        return self._tree.query_ball_point(np.asarray(queries, dtype=np.float64), r)


@dataclass(frozen=True)
class ObjectSpec:
    """Parameters of a synthetic dish (surface of revolution about +z)."""

    kind: str
    radius: float
    depth: float = 0.0
    rim_curvature: float = 2.0
    sample_count: int = 2000
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"kind must be one of {OBJECT_KINDS}, got {self.kind!r}")
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if not self.depth >= 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if not self.rim_curvature >= 1:
            raise ValueError(f"rim_curvature must be >= 1, got {self.rim_curvature}")
        if int(self.sample_count) != self.sample_count or self.sample_count < 100:
            raise ValueError(f"sample_count must be an integer >= 100, got {self.sample_count}")
        if self.kind == "pan" and self.depth <= 0:
            raise ValueError("a pan needs depth > 0")

    @property
    def object_id(self) -> str:
        return self.name or f"{self.kind}_{self.radius:g}_{self.depth:g}_{self.seed}"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# -- surface profiles ---------------------------------------------------------
#
# Each profile maps a parameter t in [0, t_max] to (r, z) and an inward unit
# normal (n_r, n_z), with n_z >= 0. Graph surfaces use t = r so that z = f(r)
# is evaluated in closed form at the sampled radius.


def _graph_profile(f, df, radius):
    def evaluate(t):
        r = t
        s = df(r)
        inv = 1.0 / np.sqrt(1.0 + s * s)
        return r, f(r), -s * inv, inv

    def speed(t):
        s = df(t)
        return np.sqrt(1.0 + s * s)

    return evaluate, speed, radius


def _bowl_profile(spec):
    R, D, p = spec.radius, spec.depth, spec.rim_curvature
    return _graph_profile(
        lambda r: D * (r / R) ** p,
        lambda r: D * p * (r / R) ** (p - 1) / R,
        R,
    )


def _plate_profile(spec):
    R, D, p = spec.radius, spec.depth, spec.rim_curvature
    r0 = PLATE_WELL_FRACTION * R
    w = R - r0

    def f(r):
        return D * np.clip((r - r0) / w, 0.0, None) ** p

    def df(r):
        return D * p * np.clip((r - r0) / w, 0.0, None) ** (p - 1) / w

    return _graph_profile(f, df, R)


def _pan_profile(spec):
    """Flat bottom, quarter-circle fillet, vertical wall; arc-length parameter."""
    R, D = spec.radius, spec.depth
    rho = min(D / spec.rim_curvature, R)
    rb = R - rho
    arc = 0.5 * np.pi * rho
    wall = D - rho

    def evaluate(t):
        t = np.asarray(t, dtype=np.float64)
        r = np.empty_like(t)
        z = np.empty_like(t)
        nr = np.empty_like(t)
        nz = np.empty_like(t)
        bottom = t <= rb
        fillet = (t > rb) & (t <= rb + arc)
        side = t > rb + arc
        r[bottom], z[bottom], nr[bottom], nz[bottom] = t[bottom], 0.0, 0.0, 1.0
        a = (t[fillet] - rb) / rho if rho > 0 else t[fillet] * 0.0
        r[fillet] = rb + rho * np.sin(a)
        z[fillet] = rho - rho * np.cos(a)
        nr[fillet] = -np.sin(a)
        nz[fillet] = np.cos(a)
        r[side] = R
        z[side] = rho + (t[side] - rb - arc)
        nr[side], nz[side] = -1.0, 0.0
        return r, z, nr, nz

    return evaluate, lambda t: np.ones_like(t), rb + arc + wall


_PROFILES = {"bowl": _bowl_profile, "plate": _plate_profile, "pan": _pan_profile}


def surface_height(spec: ObjectSpec, r):
    """Analytic height z = f(r) for graph-type objects (plate, bowl)."""
    if spec.kind == "pan":
        raise ValueError("pan walls are not a graph z = f(r)")
    evaluate, _, _ = _PROFILES[spec.kind](spec)
    return evaluate(np.asarray(r, dtype=np.float64))[1]


def generate_object(spec: ObjectSpec) -> PointCloud:
    """Sample a synthetic dish with uniform area density and exact normals.

    Radial strata are area-weighted and jittered; azimuths follow a golden
    angle sequence with a random phase, which keeps the density close to
    uniform without clustering.
    """
    evaluate, speed, t_max = _PROFILES[spec.kind](spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & 0xFFFFFFFF, spec.seed >> 32 & 0xFFFFFFFF, 0x5EED]))
    n = int(spec.sample_count)

    grid = np.linspace(0.0, t_max, _PROFILE_SAMPLES + 1)
    r_grid = evaluate(grid)[0]
    density = 2.0 * np.pi * r_grid * speed(grid)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])

    u = (np.arange(n) + rng.random(n)) / n * cum[-1]
    t = np.interp(u, cum, grid)
    r, z, nr, nz = evaluate(t)
    phi = np.arange(n) * _GOLDEN_ANGLE + rng.random() * 2.0 * np.pi
    c, s = np.cos(phi), np.sin(phi)

    points = np.column_stack([r * c, r * s, z])
    normals = np.column_stack([nr * c, nr * s, nz])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(points, normals, cloud_id=spec.object_id)


def estimate_normals(points, k=12, *, index=None) -> np.ndarray:
    """Per-point normals from a PCA plane fit over the ``k`` nearest points.

    The smallest principal direction of each neighbourhood covariance is
    taken and flipped so that ``n_z >= 0``; exactly horizontal normals are
    flipped toward +x (then +y). Neighbourhoods whose plane is undetermined
    (rank < 2) get (0, 0, 1) and trigger a :class:`DegenerateNormalWarning`.
    """
    pts = np.asarray(points, dtype=np.float64)
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    if len(pts) < k:
        raise ValueError(f"need at least k={k} points, got {len(pts)}")
    index = index or SpatialIndex(pts)
    _, nbrs = index.knn_batch(pts, k)
    nb = pts[nbrs]
    centred = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centred, centred) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()

    scale = np.maximum(evals[:, 2], 0.0)
    degenerate = (scale <= 0.0) | (evals[:, 1] <= 1e-10 * scale)
    normals[degenerate] = (0.0, 0.0, 1.0)

    flip = normals[:, 2] < 0
    horizontal = np.abs(normals[:, 2]) <= 1e-12
    flip |= horizontal & (normals[:, 0] < 0)
    flip |= horizontal & (np.abs(normals[:, 0]) <= 1e-12) & (normals[:, 1] < 0)
    normals[flip] *= -1.0
    normals[horizontal, 2] = 0.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    n_bad = int(degenerate.sum())
    if n_bad:
        warnings.warn(DegenerateNormalWarning(n_bad), stacklevel=2)
    return normals


def standard_objects(sample_count=2000):
    """Ten synthetic dishes spanning plates, bowls and pans of varied size."""
    rows = [
        ("plate_small", "plate", 0.08, 0.010, 2.0),
        ("bowl_small", "bowl", 0.07, 0.030, 2.0),
        ("plate_medium", "plate", 0.10, 0.012, 2.0),
        ("bowl_medium", "bowl", 0.08, 0.040, 2.0),
        ("pan_medium", "pan", 0.10, 0.020, 2.0),
        ("bowl_flat", "bowl", 0.10, 0.030, 3.0),
        ("plate_large", "plate", 0.12, 0.015, 3.0),
        ("pan_large", "pan", 0.12, 0.020, 2.0),
        ("bowl_large", "bowl", 0.11, 0.045, 2.0),
        ("plate_xlarge", "plate", 0.14, 0.018, 2.0),
    ]
    return [
        ObjectSpec(kind=k, radius=r, depth=d, rim_curvature=p, sample_count=sample_count, seed=i + 1, name=n)
        for i, (n, k, r, d, p) in enumerate(rows)
    ]
