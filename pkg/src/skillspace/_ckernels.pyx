# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_pykernels`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, fabs, sqrt, INFINITY

cnp.import_array()


def orthomax_sweeps(double[:, ::1] loadings, double gamma, double tol, int max_sweeps):
    """Pairwise planar orthomax rotation of ``loadings`` (modified in place).

    Returns ``(rotation, n_sweeps, converged)``.
    """
    cdef Py_ssize_t p = loadings.shape[0]
    cdef Py_ssize_t m = loadings.shape[1]
    cdef Py_ssize_t i, j, r, sweep
    cdef double a, b, c, d, u, v, x, y, num, den, theta, ct, st, max_theta
    cdef double gp = gamma / <double>p
    rot_arr = np.eye(m)
    cdef double[:, ::1] rot = rot_arr
    cdef bint converged = False

    sweep = 0
    while sweep < max_sweeps:
        sweep += 1
        max_theta = 0.0
        for i in range(m - 1):
            for j in range(i + 1, m):
                a = 0.0
                b = 0.0
                c = 0.0
                d = 0.0
                for r in range(p):
                    x = loadings[r, i]
                    y = loadings[r, j]
                    u = x * x - y * y
                    v = 2.0 * x * y
                    a += u
                    b += v
                    c += u * u - v * v
                    d += 2.0 * u * v
                num = d - 2.0 * gp * a * b
                den = c - gp * (a * a - b * b)
                theta = 0.25 * atan2(num, den)
                if fabs(theta) > max_theta:
                    max_theta = fabs(theta)
                ct = cos(theta)
                st = sin(theta)
                for r in range(p):
                    x = loadings[r, i]
                    y = loadings[r, j]
                    loadings[r, i] = ct * x + st * y
                    loadings[r, j] = -st * x + ct * y
                for r in range(m):
                    x = rot[r, i]
                    y = rot[r, j]
                    rot[r, i] = ct * x + st * y
                    rot[r, j] = -st * x + ct * y
        if max_theta < tol:
            converged = True
            break
    return rot_arr, sweep, converged


def maxmin_order(const double[:, ::1] points, Py_ssize_t start, Py_ssize_t k):
    """Greedy farthest-point selection; ties go to the lowest row index."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t dim = points.shape[1]
    cdef Py_ssize_t i, t, q, best
    cdef double dist, diff, best_val
    mind_arr = np.full(n, INFINITY)
    cdef double[::1] mind = mind_arr
    chosen_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] chosen = chosen_arr
    order = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t[::1] out = order

    best = start
    for t in range(k):
        out[t] = best
        chosen[best] = 1
        for i in range(n):
            if chosen[i]:
                continue
            dist = 0.0
            for q in range(dim):
                diff = points[i, q] - points[best, q]
                dist += diff * diff
            dist = sqrt(dist)
            if dist < mind[i]:
                mind[i] = dist
        if t + 1 == k:
            break
        best = -1
        best_val = -1.0
        for i in range(n):
            if not chosen[i] and mind[i] > best_val:
                best_val = mind[i]
                best = i
    return order
