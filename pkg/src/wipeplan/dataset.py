"""Labelled press interactions over synthetic objects, split 70/15/15."""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contact import ContactMap, SpongeModel, ToolPose, label_contact, press
from .geometry import ObjectSpec, PointCloud, generate_object
from .rng import stream

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)


@dataclass(frozen=True, eq=False)
class InteractionRecord:
    object_id: str
    pose: ToolPose
    ground_truth: ContactMap
    press_depth: float
    net_force: float
    flags: tuple = ()

    def __post_init__(self):
        if self.ground_truth.source != "ground_truth":
            raise ValueError("records hold ground-truth maps only")

    def to_dict(self):
        return {
            "object_id": self.object_id,
            "pose": self.pose.to_dict(),
            "feature": list(self.pose.feature),
            "ground_truth": self.ground_truth.to_dict(),
            "press_depth": self.press_depth,
            "net_force": self.net_force,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["object_id"],
            ToolPose.from_dict(d["pose"]),
            ContactMap.from_dict(d["ground_truth"]),
            float(d["press_depth"]),
            float(d["net_force"]),
            tuple(d.get("flags", ())),
        )


@dataclass
class DatasetManifest:
    specs: list
    contacts_per_object: int
    seed: int
    sponge: SpongeModel
    records: dict = field(default_factory=dict)  # object_id -> [InteractionRecord]
    splits: dict = field(default_factory=dict)  # object_id -> {"train": [...], ...}

    def split_records(self, split):
        out = []
        for spec in self.specs:
            recs = self.records[spec.object_id]
            out.extend(recs[i] for i in self.splits[spec.object_id][split])
        return out

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "contacts_per_object": self.contacts_per_object,
            "sponge": self.sponge.to_dict(),
            "objects": [
                {
                    "object_id": s.object_id,
                    "spec": s.to_dict(),
                    "records_file": f"records_{s.object_id}.jsonl",
                    "record_count": len(self.records.get(s.object_id, ())),
                    "splits": self.splits.get(s.object_id, {}),
                }
                for s in self.specs
            ],
        }


def split_sizes(n):
    """Train/val/test counts for ``n`` records: 70/15/15 rounded, test takes the rest."""
    n_train = int(math.floor(n * SPLIT_FRACTIONS[0] + 0.5))
    n_val = int(math.floor(n * SPLIT_FRACTIONS[1] + 0.5))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def assign_splits(n, rng):
    perm = rng.permutation(n)
    n_train, n_val, _ = split_sizes(n)
    parts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
    return {name: sorted(int(i) for i in part) for name, part in zip(SPLITS, parts)}


def pose_sampler(cloud: PointCloud, rng: np.random.Generator) -> ToolPose:
    """Uniform contact index and uniform yaw in [0, 2*pi)."""
    if cloud.count < 1:
        raise ValueError("empty cloud")
    return ToolPose(int(rng.integers(cloud.count)), float(rng.uniform(0.0, 2.0 * math.pi)))


def generate_object_records(spec: ObjectSpec, contacts: int, sponge: SpongeModel, seed: int):
    cloud = generate_object(spec)
    index = cloud.spatial_index
    rng = stream(seed, "dataset-poses", spec.object_id)
    records = []
    for _ in range(contacts):
        pose = pose_sampler(cloud, rng)
        result = press(sponge, cloud, index, pose)
        truth = label_contact(result, sponge, cloud, index)
        flags = ("force_unreached",) if result.force_unreached else ()
        records.append(InteractionRecord(spec.object_id, pose, truth, result.press_depth, result.net_force, flags))
    splits = assign_splits(contacts, stream(seed, "dataset-split", spec.object_id))
    return records, splits


def generate_dataset(specs, contacts_per_object: int, sponge: SpongeModel | None = None, seed: int = 0, out_dir=None) -> DatasetManifest:
    """Simulate and label ``contacts_per_object`` presses on every object.

    Each object draws from its own seed-derived stream, so the output does
    not depend on generation order. When ``out_dir`` is given, writes
    ``manifest.json`` and one ``records_<object_id>.jsonl`` per object; on
    failure every file written so far is removed.
    """
    if contacts_per_object < 1:
        raise ValueError("contacts_per_object must be >= 1")
    sponge = sponge or SpongeModel()
    specs = [s if isinstance(s, ObjectSpec) else ObjectSpec.from_dict(s) for s in specs]
    ids = [s.object_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"object ids must be unique, got {ids}")
    manifest = DatasetManifest(specs, contacts_per_object, seed, sponge)
    for spec in specs:
        recs, splits = generate_object_records(spec, contacts_per_object, sponge, seed)
        manifest.records[spec.object_id] = recs
        manifest.splits[spec.object_id] = splits
    if out_dir is not None:
        write_dataset(manifest, out_dir)
    return manifest


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_dataset(manifest: DatasetManifest, out_dir):
    out = Path(out_dir)
    created_dir = not out.exists()
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for spec in manifest.specs:
            path = out / f"records_{spec.object_id}.jsonl"
            written.append(path)
            with open(path, "w", encoding="utf-8") as fh:
                for rec in manifest.records[spec.object_id]:
                    fh.write(_dumps(rec.to_dict()) + "\n")
        path = out / "manifest.json"
        written.append(path)
        path.write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        if created_dir:
            shutil.rmtree(out, ignore_errors=True)
        raise
    return out


def load_dataset(out_dir) -> DatasetManifest:
    out = Path(out_dir)
    meta = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    specs = [ObjectSpec.from_dict(o["spec"]) for o in meta["objects"]]
    manifest = DatasetManifest(specs, meta["contacts_per_object"], meta["seed"], SpongeModel.from_dict(meta["sponge"]))
    for o in meta["objects"]:
        with open(out / o["records_file"], encoding="utf-8") as fh:
            manifest.records[o["object_id"]] = [InteractionRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
        manifest.splits[o["object_id"]] = {k: list(v) for k, v in o["splits"].items()}
    return manifest
