import math

import numpy as np
import pytest

from confmax.eigen import (IndefiniteMassError, cluster_eigenvalues, solve_pencil,
                           spectrum_rows)
from confmax.fem import assemble_mass, assemble_stiffness, uniform_density
from confmax.mesh import gen_flat_torus
from conftest import SQUARE


def _solve_uniform(mesh, k, seed=0):
    K = assemble_stiffness(mesh)
    M = assemble_mass(mesh, uniform_density(mesh))
    return solve_pencil(K, M, k=k, seed=seed), K, M


def test_sphere_first_clusters(sphere4):
    res, _, _ = _solve_uniform(sphere4, 9)
    assert len(res.clusters[0]) == 3
    assert len(res.clusters[1]) == 5
    v0 = np.mean(res.eigenvalues[list(res.clusters[0])])
    v1 = np.mean(res.eigenvalues[list(res.clusters[1])])
    assert abs(v0 - 8 * math.pi) / (8 * math.pi) < 0.01
    assert abs(v1 - 24 * math.pi) / (24 * math.pi) < 0.01


def test_square_torus_fourier_spectrum():
    m = gen_flat_torus(SQUARE, 48, 48)
    res, _, _ = _solve_uniform(m, 10)
    assert len(res.clusters[0]) == 4
    assert len(res.clusters[1]) == 4
    v0 = np.mean(res.eigenvalues[list(res.clusters[0])])
    v1 = np.mean(res.eigenvalues[list(res.clusters[1])])
    assert abs(v0 - 4 * math.pi ** 2) / (4 * math.pi ** 2) < 0.01
    assert abs(v1 - 8 * math.pi ** 2) / (8 * math.pi ** 2) < 0.01


def test_zero_mode_deflated(sphere2):
    res, _, M = _solve_uniform(sphere2, 1)
    assert res.lambda1 > 0
    ones = np.ones(sphere2.vertex_count)
    assert np.abs(ones @ (M.matrix @ res.eigenvectors)).max() < 1e-10


def test_m_orthonormality(sphere3):
    res, _, M = _solve_uniform(sphere3, 6)
    G = res.eigenvectors.T @ (M.matrix @ res.eigenvectors)
    assert np.abs(G - np.eye(6)).max() < 1e-8


def test_rayleigh_consistency(sphere3):
    res, K, M = _solve_uniform(sphere3, 5)
    for i in range(5):
        u = res.eigenvectors[:, i]
        rq = (u @ (K.matrix @ u)) / (u @ (M.matrix @ u))
        assert abs(rq - res.eigenvalues[i]) < 1e-8 * res.eigenvalues[i]


def test_residuals_small(sphere3):
    res, _, _ = _solve_uniform(sphere3, 5)
    assert res.residuals.max() < 1e-8


def test_density_scaling_rescales_eigenvalues(sphere2):
    K = assemble_stiffness(sphere2)
    mu = uniform_density(sphere2).values
    res1 = solve_pencil(K, assemble_mass(sphere2, mu), k=4)
    res2 = solve_pencil(K, assemble_mass(sphere2, 3.0 * mu), k=4)
    assert np.abs(res2.eigenvalues * 3.0 - res1.eigenvalues).max() \
        < 1e-8 * res1.eigenvalues.max()


def test_mesh_convergence_order():
    from confmax.mesh import gen_icosphere
    errs = []
    for s in (3, 4, 5):
        res, _, _ = _solve_uniform(gen_icosphere(s), 3)
        errs.append(abs(res.lambda1 - 8 * math.pi))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.8


def test_determinism(sphere2):
    res1, _, _ = _solve_uniform(sphere2, 5, seed=3)
    res2, _, _ = _solve_uniform(sphere2, 5, seed=3)
    assert np.array_equal(res1.eigenvalues, res2.eigenvalues)
    assert np.array_equal(res1.eigenvectors, res2.eigenvectors)


def test_indefinite_mass_refused(sphere2):
    mu = uniform_density(sphere2).values.copy()
    mu -= 2.0 * mu.max()  # mostly negative: mass matrix indefinite
    M = assemble_mass(sphere2, mu)
    K = assemble_stiffness(sphere2)
    with pytest.raises(IndefiniteMassError, match="indefinite mass"):
        solve_pencil(K, M, k=2)


def test_zero_mass_rows_excluded(sphere2):
    # kill the density on one vertex star; the solver restricts to the support
    mu = uniform_density(sphere2).values.copy()
    star = {0}
    for t in sphere2.triangles:
        if 0 in t:
            star.update(int(v) for v in t)
    mu[list(star)] = 0.0
    M = assemble_mass(sphere2, mu)
    K = assemble_stiffness(sphere2)
    res = solve_pencil(K, M, k=2)
    assert 0 in res.excluded_vertices
    assert np.all(res.eigenvectors[0] == 0.0)
    assert np.all(np.isfinite(res.eigenvalues))


def test_cluster_partition_examples():
    assert cluster_eigenvalues([2.001, 2.002, 2.003, 6.1], 0.05) == ((0, 1, 2), (3,))
    assert cluster_eigenvalues([1.0, 2.0, 3.0], 0.05) == ((0,), (1,), (2,))


def test_spectrum_rows(sphere2):
    res, _, _ = _solve_uniform(sphere2, 4)
    rows = spectrum_rows(res)
    assert len(rows) == 4
    assert rows[0][3] == 0  # first entry in first cluster
