import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from wipeplan import _pykernels as py
from wipeplan import kernels

ck = pytest.importorskip("wipeplan._ckernels")


def _press_inputs(seed, m=81, k=4):
    rng = np.random.default_rng(seed)
    pts = rng.normal(0, 0.03, (300, 3))
    nodes = rng.normal(0, 0.03, (m, 3))
    nbrs = np.ascontiguousarray(rng.integers(0, 300, (m, k)), dtype=np.intp)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    return pts, nbrs, nodes, pts[0].copy(), normal


@pytest.mark.parametrize("seed", range(5))
def test_node_heights_agree(seed):
    args = _press_inputs(seed)
    hp, sp = py.node_heights(*args, 0.02)
    hc, sc = ck.node_heights(*args, 0.02)
    assert np.allclose(hp, hc, rtol=0, atol=1e-14)
    assert np.array_equal(np.asarray(sp, bool), np.asarray(sc, bool))


@pytest.mark.parametrize("seed", range(10))
def test_solve_depth_agrees(seed):
    rng = np.random.default_rng(seed)
    hs = rng.normal(0, 0.005, 81)
    sup = rng.random(81) < 0.8
    target = float(rng.uniform(0.5, 8))
    a = py.solve_depth(hs, sup, 15.4, target, 0.02, 1e-3, 1e-6, 60)
    b = ck.solve_depth(hs, sup, 15.4, target, 0.02, 1e-3, 1e-6, 60)
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    assert a[1] == pytest.approx(b[1], abs=1e-9)
    assert a[2:] == tuple(b[2:])


@pytest.mark.parametrize("seed", range(5))
def test_label_mask_agrees(seed):
    rng = np.random.default_rng(seed)
    cand = rng.uniform(-0.05, 0.05, (400, 3))
    contacts = rng.uniform(-0.05, 0.05, (30, 3))
    assert np.array_equal(np.asarray(py.label_mask(cand, contacts, 0.006), bool), np.asarray(ck.label_mask(cand, contacts, 0.006), bool))


@pytest.mark.parametrize("closed", [False, True])
@pytest.mark.parametrize("seed", range(8))
def test_two_opt_agrees(seed, closed):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0, 1, (int(rng.integers(3, 40)), 3))
    D = cdist(pos, pos)
    start = np.arange(len(pos))
    op, mp = py.two_opt(D, start, closed, 1e-12)
    oc, mc = ck.two_opt(D, start, closed, 1e-12)
    assert list(op) == list(oc)
    assert mp == mc


def test_ball_filter_agrees():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (500, 3))
    cand = list(rng.permutation(500)[:200])
    p = np.zeros(3)
    assert list(py.ball_filter(pts, cand, p, 0.6)) == list(ck.ball_filter(pts, cand, p, 0.6))


def test_backend_selected_by_environment():
    code = "from wipeplan import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, WIPEPLAN_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("cython", "python")
