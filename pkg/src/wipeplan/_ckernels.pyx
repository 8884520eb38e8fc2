# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``; same contracts."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


def node_heights(const double[:, ::1] points, const cnp.intp_t[:, ::1] nbr_idx,
                 const double[:, ::1] nodes, const double[::1] pc,
                 const double[::1] normal, double overhang):
    cdef Py_ssize_t m = nbr_idx.shape[0], k = nbr_idx.shape[1]
    cdef Py_ssize_t a, b, q
    cdef double rx, ry, rz, along, lx, ly, lz, lat, w, h, wsum, hsum, lat_min
    cdef double nx = normal[0], ny = normal[1], nz = normal[2]
    hs_arr = np.empty(m, dtype=np.float64)
    sup_arr = np.empty(m, dtype=np.bool_)
    cdef double[::1] hs = hs_arr
    cdef cnp.npy_bool[::1] sup = sup_arr
    for a in range(m):
        wsum = 0.0
        hsum = 0.0
        lat_min = INFINITY
        for b in range(k):
            q = nbr_idx[a, b]
            rx = points[q, 0] - nodes[a, 0]
            ry = points[q, 1] - nodes[a, 1]
            rz = points[q, 2] - nodes[a, 2]
            along = rx * nx + ry * ny + rz * nz
            lx = rx - along * nx
            ly = ry - along * ny
            lz = rz - along * nz
            lat = sqrt(lx * lx + ly * ly + lz * lz)
            if lat < lat_min:
                lat_min = lat
            w = 1.0 / (lat if lat > 1e-12 else 1e-12)
            h = (points[q, 0] - pc[0]) * nx + (points[q, 1] - pc[1]) * ny + (points[q, 2] - pc[2]) * nz
            wsum += w
            hsum += w * h
        hs[a] = hsum / wsum
        sup[a] = lat_min <= overhang
    return hs_arr, sup_arr


cdef double _net_force(const double[::1] hs, const cnp.npy_bool[::1] sup, double k_node, double d) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, p
    for i in range(hs.shape[0]):
        if sup[i]:
            p = hs[i] + d
            if p > 0:
                s += p
    return k_node * s


def net_force(hs, supported, double k_node, double d):
    cdef double[::1] h = np.ascontiguousarray(hs, dtype=np.float64)
    cdef cnp.npy_bool[::1] s = np.ascontiguousarray(supported, dtype=np.bool_)
    return _net_force(h, s, k_node, d)


def solve_depth(hs_in, sup_in, double k_node, double target, double d_max,
                double tol_force, double tol_depth, int max_iter):
    cdef double[::1] hs = np.ascontiguousarray(hs_in, dtype=np.float64)
    cdef cnp.npy_bool[::1] sup = np.ascontiguousarray(sup_in, dtype=np.bool_)
    cdef Py_ssize_t i, n = hs.shape[0]
    cdef bint any_sup = False
    cdef double hmax = -INFINITY
    for i in range(n):
        if sup[i]:
            any_sup = True
            if hs[i] > hmax:
                hmax = hs[i]
    if not any_sup:
        return d_max, 0.0, 0, False
    cdef double f_hi = _net_force(hs, sup, k_node, d_max)
    if f_hi < target - tol_force:
        return d_max, f_hi, 0, False
    if fabs(f_hi - target) <= tol_force:
        return d_max, f_hi, 0, True
    cdef double lo = -hmax, f_lo = 0.0, hi = d_max
    cdef double d = hi, f = f_hi
    cdef int it
    for it in range(1, max_iter + 1):
        if hi - lo < tol_depth and f_hi > f_lo:
            d = lo + (target - f_lo) * (hi - lo) / (f_hi - f_lo)
            if not (lo < d < hi):
                d = 0.5 * (lo + hi)
        else:
            d = 0.5 * (lo + hi)
        f = _net_force(hs, sup, k_node, d)
        if fabs(f - target) <= tol_force:
            return d, f, it, True
        if f < target:
            lo = d
            f_lo = f
        else:
            hi = d
            f_hi = f
    return d, f, max_iter, True


def label_mask(const double[:, ::1] cand, const double[:, ::1] contact, double tau):
    cdef Py_ssize_t m = cand.shape[0], c = contact.shape[0], a, b
    cdef double t2 = tau * tau, dx, dy, dz
    out_arr = np.zeros(m, dtype=np.bool_)
    cdef cnp.npy_bool[::1] out = out_arr
    for a in range(m):
        for b in range(c):
            dx = cand[a, 0] - contact[b, 0]
            dy = cand[a, 1] - contact[b, 1]
            dz = cand[a, 2] - contact[b, 2]
            if dx * dx + dy * dy + dz * dz <= t2:
                out[a] = True
                break
    return out_arr


def two_opt(D_in, order_in, bint closed, double eps):
    cdef double[:, ::1] D = np.ascontiguousarray(D_in, dtype=np.float64)
    order_arr = np.array(order_in, dtype=np.intp)
    cdef cnp.intp_t[::1] o = order_arr
    cdef Py_ssize_t n = o.shape[0], i, j, bi, bj, lo, hi, start
    cdef cnp.intp_t tmp, prev, nxt
    cdef double best, delta
    cdef int moves = 0
    if n < 3:
        return order_arr, 0
    start = 1 if closed else 0
    while True:
        best = INFINITY
        bi = -1
        bj = -1
        for i in range(start, n):
            for j in range(i + 1, n):
                delta = 0.0
                if closed:
                    prev = o[i - 1]
                    nxt = o[(j + 1) % n]
                    delta = D[prev, o[j]] + D[o[i], nxt] - D[prev, o[i]] - D[o[j], nxt]
                else:
                    if i > 0:
                        prev = o[i - 1]
                        delta += D[prev, o[j]] - D[prev, o[i]]
                    if j < n - 1:
                        nxt = o[j + 1]
                        delta += D[o[i], nxt] - D[o[j], nxt]
                if delta < best:
                    best = delta
                    bi = i
                    bj = j
        if not best < -eps:
            return order_arr, moves
        lo = bi
        hi = bj
        while lo < hi:
            tmp = o[lo]
            o[lo] = o[hi]
            o[hi] = tmp
            lo += 1
            hi -= 1
        moves += 1



def ball_filter(const double[:, ::1] points, list cand, const double[::1] p, double r):
    cdef Py_ssize_t n = len(cand), a, q, kept = 0
    cdef double dx, dy, dz
    out_arr = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] out = out_arr
    for a in range(n):
        q = <Py_ssize_t>cand[a]
        dx = points[q, 0] - p[0]
        dy = points[q, 1] - p[1]
        dz = points[q, 2] - p[2]
        if sqrt(dx * dx + dy * dy + dz * dz) <= r:
            out[kept] = q
            kept += 1
    res = out_arr[:kept]
    res.sort()
    return res
