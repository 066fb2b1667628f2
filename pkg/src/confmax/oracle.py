"""Brute-force cross-check for the torus maximizer.

Deliberately independent of the main pipeline: its own dense assembly on a
structured square-torus grid, a dense generalized eigensolver, and a plain
projected-subgradient ascent with random restarts. Small grids only.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import eigh


def square_torus_matrices(n, mu):
    """Dense P1 stiffness and mu-weighted consistent mass on the unit torus.

    n x n grid, each cell split along the (+1, +1) diagonal. Vertex (i, j)
    has index i * n + j.
    """
    V = n * n
    h = 1.0 / n
    area = 0.5 * h * h

    def vid(i, j):
        return (i % n) * n + (j % n)

    tris = []
    for i in range(n):
        for j in range(n):
            tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))

    K = np.zeros((V, V))
    M = np.zeros((V, V))
    mu = np.asarray(mu, dtype=float)
    # element loop from coordinates (kept simple and dense on purpose)
    coords = np.array([[(t // n) * h, (t % n) * h] for t in range(V)])
    for (a, b, c) in tris:
        # unwrap periodic images so the element is geometrically contiguous
        pa = coords[a]
        pb = _unwrap(coords[b], pa)
        pc = _unwrap(coords[c], pa)
        e0, e1, e2 = pc - pb, pa - pc, pb - pa
        A2 = abs(e2[0] * (-e1[1]) - e2[1] * (-e1[0]))
        A = 0.5 * A2
        grads = np.array([[-e0[1], e0[0]], [-e1[1], e1[0]], [-e2[1], e2[0]]]) / A2
        idx = (a, b, c)
        for p in range(3):
            for q in range(3):
                K[idx[p], idx[q]] += A * grads[p] @ grads[q]
        m = mu[list(idx)]
        tot = m.sum()
        for p in range(3):
            M[idx[p], idx[p]] += (A / 60.0) * (4.0 * m[p] + 2.0 * tot)
            for q in range(p + 1, 3):
                v = (A / 60.0) * (m[p] + m[q] + tot)
                M[idx[p], idx[q]] += v
                M[idx[q], idx[p]] += v
    return K, M


def _unwrap(p, ref):
    out = p.copy()
    for d in range(2):
        if out[d] - ref[d] > 0.5:
            out[d] -= 1.0
        elif out[d] - ref[d] < -0.5:
            out[d] += 1.0
    return out


def _vertex_areas(n):
    # six incident triangles per vertex on this grid, each of area h^2/2
    h = 1.0 / n
    return np.full(n * n, 6 * (0.5 * h * h) / 3.0)


def _project(values, areas, cap):
    """Clip to [0, cap] and restore unit mass by bisection on a scalar shift."""
    lo = -values.max() - 1.0
    hi = cap + 1.0
    for _ in range(200):
        c = 0.5 * (lo + hi)
        m = areas @ np.clip(values + c, 0.0, cap)
        if m < 1.0:
            lo = c
        else:
            hi = c
    return np.clip(values + 0.5 * (lo + hi), 0.0, cap)


def _lambda_and_grad(n, mu, cluster_gap=0.02):
    K, M = square_torus_matrices(n, mu)
    vals, vecs = eigh(K, M + 1e-13 * np.eye(len(M)))
    lam = vals[1]  # vals[0] is the constant mode
    areas = _vertex_areas(n)
    # subgradient averaged over the first cluster to tame multiplicity
    grad = np.zeros(len(mu))
    count = 0
    for i in range(1, len(vals)):
        if vals[i] > lam * (1.0 + cluster_gap):
            break
        u = vecs[:, i]
        grad += -lam * areas * u * u
        count += 1
    return lam, grad / count


def brute_force_torus_max(n=12, cap_rel=64.0, restarts=20, iters=300, seed=0):
    """Best lambda1 * area over the box-and-mass set, by restarted ascent."""
    rng = np.random.default_rng(seed)
    areas = _vertex_areas(n)
    cap = cap_rel  # unit-area torus: mean density is 1
    best = -np.inf
    for _ in range(restarts):
        mu = _project(rng.uniform(0.5, 1.5, n * n), areas, cap)
        lam, grad = _lambda_and_grad(n, mu)
        alpha = 0.1 / max(np.abs(grad).max(), 1e-12)
        for _ in range(iters):
            cand = _project(mu + alpha * grad, areas, cap)
            lam_c, grad_c = _lambda_and_grad(n, cand)
            if lam_c > lam:
                mu, lam, grad = cand, lam_c, grad_c
                alpha *= 1.3
            else:
                alpha *= 0.5
                if alpha * np.abs(grad).max() < 1e-12:
                    break
        best = max(best, lam)
    return best
