"""Compare the compiled kernels with the NumPy fallback.

Times each kernel on representative inputs, then a full ``plan`` run under
each backend in a subprocess (the backend is fixed at import time).

    python3 benchmarks/bench_kernels.py [--repeat 200] [--n-sets 20]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np
from scipy.spatial.distance import cdist

from wipeplan import _pykernels
from wipeplan.contact import SpongeModel, ToolPose, tool_axes
from wipeplan.geometry import ObjectSpec, generate_object

try:
    from wipeplan import _ckernels
except ImportError:
    _ckernels = None

PLAN_SNIPPET = """
import time
from wipeplan import kernels
from wipeplan.geometry import ObjectSpec, generate_object
from wipeplan.planner import PlanConfig, plan
cloud = generate_object(ObjectSpec("bowl", 0.08, 0.04, 2.0, 2000, seed=1))
t = time.perf_counter()
traj = plan(cloud, PlanConfig(n_sets={n_sets}, seed=0))
print(kernels.BACKEND, time.perf_counter() - t, len(traj))
"""


def kernel_inputs():
    cloud = generate_object(ObjectSpec("bowl", 0.08, 0.04, 2.0, 2000, seed=1))
    sponge = SpongeModel()
    idx = 700
    pc, normal = cloud.points[idx], cloud.normals[idx]
    x, y = tool_axes(normal, 0.3)
    u, v = sponge.grid_offsets
    nodes = np.ascontiguousarray(pc + u[:, None] * x + v[:, None] * y)
    _, nbrs = cloud.spatial_index.knn_batch(nodes, 4)
    nbrs = np.ascontiguousarray(nbrs, dtype=np.intp)
    hs, sup = _pykernels.node_heights(cloud.points, nbrs, nodes, pc, normal, sponge.overhang_distance)
    cand = cloud.spatial_index.radius_query(pc, 0.05)
    cand_pts = np.ascontiguousarray(cloud.points[cand])
    pos = np.random.default_rng(0).uniform(0, 0.2, (30, 3))
    D = cdist(pos, pos)
    return {
        "node_heights": lambda k: k.node_heights(cloud.points, nbrs, nodes, pc, normal, sponge.overhang_distance),
        "solve_depth": lambda k: k.solve_depth(hs, sup, sponge.node_stiffness, 5.0, sponge.height, 1e-3, 1e-6, 60),
        "label_mask": lambda k: k.label_mask(cand_pts, nodes, sponge.label_radius),
        "two_opt(30)": lambda k: k.two_opt(D, np.arange(30), False, 1e-12),
        "ball_filter": lambda k: k.ball_filter(cloud.points, list(range(0, 2000, 3)), pc, 0.03),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--n-sets", type=int, default=20)
    args = ap.parse_args()

    print(f"{'kernel':<14} {'python us':>11} {'cython us':>11} {'speedup':>8}")
    for name, call in kernel_inputs().items():
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=args.repeat, repeat=3)) / args.repeat * 1e6
        if _ckernels is None:
            print(f"{name:<14} {t_py:>11.1f} {'n/a':>11}")
            continue
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=args.repeat, repeat=3)) / args.repeat * 1e6
        print(f"{name:<14} {t_py:>11.1f} {t_c:>11.1f} {t_py / t_c:>7.1f}x")

    print(f"\nplan(n_sets={args.n_sets}) on a 2000-point bowl:")
    for backend in ("python", "cython"):
        env = dict(os.environ, WIPEPLAN_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", PLAN_SNIPPET.format(n_sets=args.n_sets)], env=env, capture_output=True, text=True)
        if out.returncode:
            print(f"  {backend}: failed ({out.stderr.strip().splitlines()[-1]})")
            continue
        used, secs, n = out.stdout.split()
        print(f"  requested {backend:<7} ran {used:<7} {float(secs):7.2f} s, {n} waypoints")


if __name__ == "__main__":
    main()
