"""Pure-Python versions of the compiled kernels in ``_ckernels.pyx``."""

import math

import numpy as np


def orthomax_sweeps(loadings, gamma, tol, max_sweeps):
    p, m = loadings.shape
    rot = np.eye(m)
    gp = gamma / p
    sweep = 0
    converged = False
    while sweep < max_sweeps:
        sweep += 1
        max_theta = 0.0
        for i in range(m - 1):
            for j in range(i + 1, m):
                x = loadings[:, i].copy()
                y = loadings[:, j].copy()
                u = x * x - y * y
                v = 2.0 * x * y
                a = u.sum()
                b = v.sum()
                num = 2.0 * np.dot(u, v) - 2.0 * gp * a * b
                den = np.dot(u, u) - np.dot(v, v) - gp * (a * a - b * b)
                theta = 0.25 * math.atan2(num, den)
                max_theta = max(max_theta, abs(theta))
                ct, st = math.cos(theta), math.sin(theta)
                loadings[:, i] = ct * x + st * y
                loadings[:, j] = -st * x + ct * y
                ri = rot[:, i].copy()
                rj = rot[:, j].copy()
                rot[:, i] = ct * ri + st * rj
                rot[:, j] = -st * ri + ct * rj
        if max_theta < tol:
            converged = True
            break
    return rot, sweep, converged


def maxmin_order(points, start, k):
    n = points.shape[0]
    mind = np.full(n, np.inf)
    chosen = np.zeros(n, dtype=bool)
    order = np.empty(k, dtype=np.intp)
    best = start
    for t in range(k):
        order[t] = best
        chosen[best] = True
        dist = np.sqrt(((points - points[best]) ** 2).sum(axis=1))
        mind = np.minimum(mind, dist)
        if t + 1 == k:
            break
        masked = np.where(chosen, -1.0, mind)
        best = int(np.argmax(masked))
    return order
