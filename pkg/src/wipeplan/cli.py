"""Command-line entry point.

Exit codes: 0 success, 1 usage or parameter error, 2 I/O or parse error,
3 internal invariant violation. Every run writes ``run_config.json`` next
to its outputs; passing it back with ``--config`` reproduces the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .cloud_io import CloudParseError, EmptyCloudError, load_cloud, save_cloud
from .contact import ContactMap, GeometricPredictor, SpongeModel, rigid_variant
from .dataset import generate_dataset, load_dataset
from .evaluator import NoiseModel, benchmark, execute_and_evaluate, f1_contact
from .geometry import ObjectSpec, generate_object, standard_objects
from .planner import PlanConfig, Trajectory, plan

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3

_SPONGE_FLAGS = {
    "sponge_width": "width",
    "sponge_length": "length",
    "sponge_height": "height",
    "youngs_modulus": "youngs_modulus",
    "grid_nx": "grid_nx",
    "grid_ny": "grid_ny",
    "target_force": "target_force",
    "node_force_threshold": "node_force_threshold",
    "label_radius": "label_radius",
    "reference_node_count": "reference_node_count",
}


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _add_sponge_flags(p):
    g = p.add_argument_group("sponge")
    g.add_argument("--sponge-width", type=float)
    g.add_argument("--sponge-length", type=float)
    g.add_argument("--sponge-height", type=float)
    g.add_argument("--youngs-modulus", type=float)
    g.add_argument("--grid-nx", type=int)
    g.add_argument("--grid-ny", type=int)
    g.add_argument("--target-force", type=float)
    g.add_argument("--node-force-threshold", type=float)
    g.add_argument("--label-radius", type=float)
    g.add_argument("--reference-node-count", type=int)
    g.add_argument("--rigid", action="store_true", default=None, help="use Young's modulus 2e9 Pa")


def _add_common(p):
    p.add_argument("--config", help="JSON file supplying any flag (command line wins)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = _Parser(prog="wipeplan", description="Coverage planning for wiping with a deformable sponge.")
    parser.add_argument("--version", action="store_true", help="print versions and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-object", help="write a synthetic dish point cloud")
    _add_common(p)
    p.add_argument("--kind", choices=("plate", "bowl", "pan"), default="bowl")
    p.add_argument("--radius", type=float, default=0.08)
    p.add_argument("--depth", type=float, default=0.04)
    p.add_argument("--rim-curvature", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--name", default="")
    p.add_argument("--format", choices=("ply_ascii", "xyz_csv"))
    p.add_argument("--out", required=True)

    for name in ("gen-dataset", "generate"):
        p = sub.add_parser(name, help="simulate and label press interactions")
        _add_common(p)
        p.add_argument("--objects", help="JSON list of object specs (default: the ten standard dishes)")
        p.add_argument("--contacts", type=int, default=1000)
        p.add_argument("--out", required=True)
        _add_sponge_flags(p)

    p = sub.add_parser("plan", help="plan a coverage trajectory for a cloud")
    _add_common(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--format", choices=("ply_ascii", "xyz_csv"))
    p.add_argument("--n-sets", type=int, default=50)
    p.add_argument("--closed", action="store_true", default=None, help="plan a closed tour")
    p.add_argument("--out", required=True)
    _add_sponge_flags(p)

    p = sub.add_parser("evaluate", help="execute a trajectory and report coverage")
    _add_common(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--format", choices=("ply_ascii", "xyz_csv"))
    p.add_argument("--traj", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--force-deficit", type=float, default=0.0)
    p.add_argument("--out", help="report JSON (default: print to stdout)")
    _add_sponge_flags(p)

    p = sub.add_parser("benchmark", help="plan and execute repeated trials per object")
    _add_common(p)
    p.add_argument("--objects", help="JSON list of object specs (default: the ten standard dishes)")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--n-sets", type=int, default=50)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--force-deficit", type=float, default=0.0)
    p.add_argument("--out", required=True)
    _add_sponge_flags(p)

    p = sub.add_parser("f1", help="contact-prediction F1 against ground truth")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory written by gen-dataset")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--pred", help="predicted contact map JSON")
    p.add_argument("--truth", help="ground-truth contact map JSON")
    p.add_argument("--out", help="result JSON (default: print to stdout)")
    _add_sponge_flags(p)
    return parser


def _load_config(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e.strerror or e}") from e
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


_COMMAND_NAMES = ("gen-object", "gen-dataset", "generate", "plan", "evaluate", "benchmark", "f1")


def parse_args(argv):
    parser = build_parser()
    argv = list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config = _load_config(known.config) if known.config else {}
    command = next((a for a in argv if a in _COMMAND_NAMES), None)
    if command is None and config.get("command") in _COMMAND_NAMES:
        command = config["command"]
        argv = [command] + argv
    if config and command:
        subparser = parser._subparsers._group_actions[0].choices[command]
        valid = {a.dest for a in subparser._actions}
        defaults = {k: v for k, v in config.items() if k in valid and k not in ("config", "help")}
        subparser.set_defaults(**defaults)
        # Required flags may come from the file.
        for action in subparser._actions:
            if action.dest in defaults:
                action.required = False
    return parser, parser.parse_args(argv)


def _sponge(args, base=None) -> SpongeModel:
    base = base or SpongeModel()
    over = {field: getattr(args, flag) for flag, field in _SPONGE_FLAGS.items() if getattr(args, flag, None) is not None}
    sponge = replace(base, **over)
    if getattr(args, "rigid", None):
        sponge = rigid_variant(sponge)
    return sponge


def _specs(path):
    if not path:
        return standard_objects()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("objects", [])
    return [ObjectSpec.from_dict(d) for d in data]


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _record_run(args, out_dir, resolved):
    skip = {"config", "version"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg.update(resolved)
    cfg["schema_version"] = SCHEMA_VERSION
    cfg["wipeplan_version"] = __version__
    _write_json(Path(out_dir) / "run_config.json", cfg)


def _cmd_gen_object(args):
    spec = ObjectSpec(args.kind, args.radius, args.depth, args.rim_curvature, args.samples, args.seed, args.name)
    cloud = generate_object(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_cloud(cloud, out, args.format)
    _record_run(args, out.parent, {"object": spec.to_dict()})
    print(f"wrote {cloud.count} points to {out}")


def _cmd_gen_dataset(args):
    sponge = _sponge(args)
    specs = _specs(args.objects)
    manifest = generate_dataset(specs, args.contacts, sponge, args.seed, out_dir=args.out)
    _record_run(args, args.out, {"sponge": sponge.to_dict()})
    total = sum(len(r) for r in manifest.records.values())
    sizes = {s: len(manifest.split_records(s)) for s in ("train", "val", "test")}
    print(f"wrote {total} records for {len(specs)} object(s) to {args.out}: {sizes}")


def _verify_cover(cloud, traj, predictor):
    union = np.zeros(cloud.count, dtype=bool)
    for pose in traj.poses:
        union |= predictor(cloud, pose).mask
    if not union.all():
        raise InvariantError(f"trajectory leaves {int((~union).sum())} point(s) uncovered")


def _cmd_plan(args):
    cloud = load_cloud(args.cloud, args.format)
    sponge = _sponge(args)
    config = PlanConfig(n_sets=args.n_sets, seed=args.seed, sponge=sponge, closed=bool(args.closed), threads=args.threads)
    predictor = config.make_predictor()
    traj = plan(cloud, config, predictor)
    _verify_cover(cloud, traj, predictor)
    _write_json(args.out, traj.to_dict(cloud, config))
    _record_run(args, Path(args.out).parent, {"sponge": sponge.to_dict(), "kernel_backend": kernels.BACKEND})
    print(f"{len(traj)} waypoints, path length {traj.path_length:.4f} m -> {args.out}")


def _cmd_evaluate(args):
    cloud = load_cloud(args.cloud, args.format)
    data = json.loads(Path(args.traj).read_text(encoding="utf-8"))
    traj = Trajectory.from_dict(data, cloud)
    base = SpongeModel.from_dict(data["config"]["sponge"]) if data.get("config", {}).get("sponge") else None
    sponge = _sponge(args, base)
    noise = NoiseModel(args.noise_sigma, args.force_deficit, args.seed)
    report = execute_and_evaluate(cloud, traj, sponge, noise)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "object": cloud.cloud_id,
        "coverage_percent": report.coverage_percent,
        "waypoint_count": report.waypoint_count,
        "path_length_m": report.path_length,
        "per_waypoint_counts": list(report.per_waypoint_counts),
        "flags": list(report.flags),
    }
    if args.out:
        _write_json(args.out, payload)
        _record_run(args, Path(args.out).parent, {"sponge": sponge.to_dict()})
    else:
        print(json.dumps(payload, sort_keys=True, indent=1))
    print(f"coverage {report.coverage_percent:.2f}% over {report.waypoint_count} waypoints", file=sys.stderr)


def _cmd_benchmark(args):
    sponge = _sponge(args)
    specs = _specs(args.objects)
    config = PlanConfig(n_sets=args.n_sets, seed=args.seed, sponge=sponge, threads=args.threads)
    noise = NoiseModel(args.noise_sigma, args.force_deficit, args.seed)
    result = benchmark(specs, args.trials, config, noise)
    result.write(args.out)
    _record_run(args, args.out, {"sponge": sponge.to_dict()})
    sys.stdout.write(result.summary_csv())


def _cmd_f1(args):
    if args.pred and args.truth:
        pred = ContactMap.from_dict(json.loads(Path(args.pred).read_text(encoding="utf-8")))
        truth = ContactMap.from_dict(json.loads(Path(args.truth).read_text(encoding="utf-8")))
        payload = {"schema_version": SCHEMA_VERSION, **f1_contact(pred, truth)}
    elif args.dataset:
        manifest = load_dataset(args.dataset)
        predictor = GeometricPredictor(_sponge(args, manifest.sponge))
        scores = []
        clouds = {s.object_id: generate_object(s) for s in manifest.specs}
        for rec in manifest.split_records(args.split):
            pred = predictor(clouds[rec.object_id], rec.pose)
            scores.append(f1_contact(pred, rec.ground_truth))
        payload = {
            "schema_version": SCHEMA_VERSION,
            "split": args.split,
            "records": len(scores),
            "predictor": predictor.predictor_id,
            "precision": float(np.mean([s["precision"] for s in scores])) if scores else None,
            "recall": float(np.mean([s["recall"] for s in scores])) if scores else None,
            "f1": float(np.mean([s["f1"] for s in scores])) if scores else None,
        }
    else:
        raise UsageError("f1 needs --dataset DIR or both --pred and --truth")
    if args.out:
        _write_json(args.out, payload)
        _record_run(args, Path(args.out).parent, {})
    else:
        print(json.dumps(payload, sort_keys=True, indent=1))


_COMMANDS = {
    "gen-object": _cmd_gen_object,
    "gen-dataset": _cmd_gen_dataset,
    "generate": _cmd_gen_dataset,
    "plan": _cmd_plan,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
    "f1": _cmd_f1,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        parser, args = parse_args(argv)
        if args.version:
            print(f"wipeplan {__version__} (schema {SCHEMA_VERSION}, kernels: {kernels.BACKEND})")
            return EXIT_OK
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        _COMMANDS[args.command](args)
        return EXIT_OK
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (CloudParseError, EmptyCloudError, json.JSONDecodeError, OSError, KeyError) as e:
        print(f"wipeplan: error: {e}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as e:
        print(f"wipeplan: invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, TypeError, IndexError) as e:
        print(f"wipeplan: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
