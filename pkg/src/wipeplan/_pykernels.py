"""Pure-Python/NumPy kernels. Reference semantics for ``_ckernels.pyx``."""

import numpy as np


def node_heights(points, nbr_idx, nodes, pc, normal, overhang):
    """Surface height under each node, measured along ``normal`` from ``pc``.

    Heights are inverse-lateral-distance weighted over the given neighbours.
    A node is supported when at least one neighbour lies within
    ``overhang`` of it laterally.
    """
    q = points[nbr_idx]  # (m, k, 3)
    rel = q - nodes[:, None, :]
    along = rel @ normal
    lat_vec = rel - along[..., None] * normal
    lat = np.sqrt(np.einsum("mki,mki->mk", lat_vec, lat_vec))
    w = 1.0 / np.maximum(lat, 1e-12)
    h = (q - pc) @ normal
    hs = (w * h).sum(axis=1) / w.sum(axis=1)
    supported = lat.min(axis=1) <= overhang
    return hs, supported


def net_force(hs, supported, k_node, d):
    pen = hs[supported] + d
    return k_node * pen[pen > 0].sum()


def solve_depth(hs, supported, k_node, target, d_max, tol_force, tol_depth, max_iter):
    """Bisection on press depth so the summed spring force meets ``target``.

    Returns ``(depth, net_force, iterations, reached)``. Once the bracket is
    narrower than ``tol_depth`` the step switches to false position, which is
    exact on a linear stretch of the force curve.
    """
    hs = np.asarray(hs, dtype=np.float64)
    supported = np.asarray(supported, dtype=bool)
    if not supported.any():
        return d_max, 0.0, 0, False
    f_hi = net_force(hs, supported, k_node, d_max)
    if f_hi < target - tol_force:
        return d_max, f_hi, 0, False
    if abs(f_hi - target) <= tol_force:
        return d_max, f_hi, 0, True
    lo = -float(hs[supported].max())
    f_lo = 0.0
    hi = d_max
    d, f = hi, f_hi
    for it in range(1, max_iter + 1):
        if hi - lo < tol_depth and f_hi > f_lo:
            d = lo + (target - f_lo) * (hi - lo) / (f_hi - f_lo)
            if not lo < d < hi:
                d = 0.5 * (lo + hi)
        else:
            d = 0.5 * (lo + hi)
        f = net_force(hs, supported, k_node, d)
        if abs(f - target) <= tol_force:
            return d, f, it, True
        if f < target:
            lo, f_lo = d, f
        else:
            hi, f_hi = d, f
    return d, f, max_iter, True


def label_mask(cand_points, contact_pos, tau):
    """True for candidates within ``tau`` of any contact position."""
    out = np.zeros(len(cand_points), dtype=bool)
    if len(contact_pos) == 0 or len(cand_points) == 0:
        return out
    t2 = tau * tau
    for c in contact_pos:
        diff = cand_points - c
        out |= np.einsum("ij,ij->i", diff, diff) <= t2
    return out


def _move_deltas(D, order, closed):
    n = len(order)
    o = np.asarray(order)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    valid = j > i
    prev = o[(i - 1) % n]
    nxt = o[(j + 1) % n]
    oi = o[i]
    oj = o[j]
    delta = np.zeros((n, n))
    if closed:
        valid &= i >= 1
        delta = D[prev, oj] + D[oi, nxt] - D[prev, oi] - D[oj, nxt]
    else:
        has_prev = np.broadcast_to(i > 0, (n, n))
        has_next = np.broadcast_to(j < n - 1, (n, n))
        delta = np.where(has_prev, D[prev, oj] - D[prev, oi], 0.0) + np.where(has_next, D[oi, nxt] - D[oj, nxt], 0.0)
    return np.where(valid, delta, np.inf)


def two_opt(D, order, closed, eps):
    """Best-improvement 2-opt by segment reversal. Returns ``(order, moves)``."""
    order = np.array(order, dtype=np.intp)
    n = len(order)
    moves = 0
    if n < 3:
        return order, moves
    D = np.asarray(D, dtype=np.float64)
    while True:
        delta = _move_deltas(D, order, closed)
        flat = int(np.argmin(delta))
        best = delta.flat[flat]
        if not best < -eps:
            return order, moves
        i, j = divmod(flat, n)
        order[i : j + 1] = order[i : j + 1][::-1].copy()
        moves += 1



def ball_filter(points, cand, p, r):
    """Sorted members of ``cand`` within distance ``r`` of ``p``."""
    cand = np.sort(np.asarray(cand, dtype=np.intp))
    d = points[cand] - p
    return cand[np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]) <= r]
