"""P1 finite element assembly on intrinsic meshes.

Stiffness is the cotangent matrix (mu-independent: Dirichlet energy is a
conformal invariant in 2D); mass carries the per-vertex conformal density.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .mesh import TriangleMesh


class DensityError(ValueError):
    """Density violates its box or mass constraints."""


@dataclass(frozen=True)
class DensityField:
    """Per-vertex conformal density with unit total mass.

    floor/cap are the actual per-vertex bounds (None = unconstrained, used for
    raw diagnostic candidates such as recovered densities).
    """
    mesh: TriangleMesh
    values: np.ndarray
    floor: float | None = None
    cap: float | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.mesh.vertex_count,):
            raise DensityError("density must have one value per vertex")
        slack = 1e-9
        if self.floor is not None and np.any(vals < self.floor - slack):
            raise DensityError(f"density below floor {self.floor}")
        if self.cap is not None and np.any(vals > self.cap + slack):
            raise DensityError(f"density above cap {self.cap}")
        m = self.mass()
        if abs(m - 1.0) > 1e-10:
            raise DensityError(f"density mass {m} != 1")

    def mass(self):
        """Integral of the P1 density over the mesh (exact quadrature)."""
        return float(self.mesh.vertex_areas @ self.values)

    def with_bounds(self, floor, cap):
        return DensityField(self.mesh, self.values, floor, cap)


def density_mass(mesh, values):
    """Exact P1 integral of a raw per-vertex field."""
    return float(mesh.vertex_areas @ np.asarray(values, dtype=float))


def uniform_density(mesh, floor=None, cap=None):
    return DensityField(mesh, np.full(mesh.vertex_count, 1.0 / mesh.area), floor, cap)


def random_density(mesh, seed, lo=0.5, hi=1.5, floor=None, cap=None):
    """Random density, values in [lo, hi]/A before mass renormalization."""
    rng = np.random.default_rng(seed)
    vals = rng.uniform(lo, hi, mesh.vertex_count) / mesh.area
    vals /= density_mass(mesh, vals)
    return DensityField(mesh, vals, floor, cap)


@dataclass(frozen=True)
class StiffnessMatrix:
    matrix: sparse.csr_matrix
    thin_triangles: tuple = ()

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class MassMatrix:
    matrix: sparse.csr_matrix
    mode: str
    min_density: float

    @property
    def shape(self):
        return self.matrix.shape


def _cotangents(mesh):
    """Per-triangle cotangents at each corner from intrinsic lengths, (F, 3)."""
    l = mesh.triangle_edge_lengths
    a2 = l ** 2
    # cot at corner c = (b^2 + c^2 - a^2) / (4A), a the opposite edge
    num = np.empty_like(l)
    num[:, 0] = a2[:, 1] + a2[:, 2] - a2[:, 0]
    num[:, 1] = a2[:, 0] + a2[:, 2] - a2[:, 1]
    num[:, 2] = a2[:, 0] + a2[:, 1] - a2[:, 2]
    return num / (4.0 * mesh.areas[:, None])


def assemble_stiffness(mesh):
    """Cotangent stiffness: K_ij = -(cot a + cot b)/2 on edges, zero row sums."""
    cot = _cotangents(mesh)
    # warn on nearly degenerate corners (angle below ~1e-8 rad => huge cot)
    thin = np.nonzero(np.abs(cot).max(axis=1) > 1.0 / 1e-8)[0]
    if thin.size:
        warnings.warn(f"near-degenerate triangles: {thin.tolist()}", RuntimeWarning)
    tri = mesh.triangles
    V = mesh.vertex_count
    rows, cols, vals = [], [], []
    for c, (a, b) in enumerate(((1, 2), (0, 2), (0, 1))):
        w = 0.5 * cot[:, c]
        rows += [tri[:, a], tri[:, b], tri[:, a], tri[:, b]]
        cols += [tri[:, b], tri[:, a], tri[:, a], tri[:, b]]
        vals += [-w, -w, w, w]
    K = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(V, V)).tocsr()
    K.sum_duplicates()
    return StiffnessMatrix(K, tuple(int(t) for t in thin))


def assemble_mass(mesh, density, mode="consistent"):
    """Mass matrix for the P1 density (DensityField or raw per-vertex array).

    Consistent mode integrates hat x hat x (P1 density) exactly per triangle;
    lumped mode is its row-sum diagonal.
    """
    mu = density.values if isinstance(density, DensityField) else np.asarray(density, float)
    tri = mesh.triangles
    A = mesh.areas
    m = mu[tri]  # (F, 3) corner densities
    V = mesh.vertex_count
    if mode == "lumped":
        # row sum of consistent element: (A/12) * (2 mu_a + mu_b + mu_c)
        diag = np.zeros(V)
        tot = m.sum(axis=1)
        for a in range(3):
            np.add.at(diag, tri[:, a], (A / 12.0) * (m[:, a] + tot))
        M = sparse.diags(diag).tocsr()
    elif mode == "consistent":
        rows, cols, vals = [], [], []
        tot = m.sum(axis=1)
        for a in range(3):
            # int phi_a phi_a (sum mu_c phi_c) = (A/60)(6 mu_a + 2 mu_b + 2 mu_c)
            rows.append(tri[:, a])
            cols.append(tri[:, a])
            vals.append((A / 60.0) * (4.0 * m[:, a] + 2.0 * tot))
            for b in range(a + 1, 3):
                # int phi_a phi_b (sum mu_c phi_c) = (A/60)(2 mu_a + 2 mu_b + mu_c)
                v = (A / 60.0) * (m[:, a] + m[:, b] + tot)
                rows += [tri[:, a], tri[:, b]]
                cols += [tri[:, b], tri[:, a]]
                vals += [v, v]
        M = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(V, V)).tocsr()
        M.sum_duplicates()
    else:
        raise ValueError(f"unknown mass mode {mode!r}")
    return MassMatrix(M, mode, float(mu.min()))


def gradient_field(mesh, u):
    """Squared P1 gradient of a per-vertex field.

    Returns (per-triangle |grad u|^2, per-vertex area-weighted average).
    Computed intrinsically: u^T K_elem u / A_elem per triangle.
    """
    u = np.asarray(u, dtype=float)
    cot = _cotangents(mesh)
    tri = mesh.triangles
    uv = u[tri]
    energy = np.zeros(len(tri))
    for c, (a, b) in enumerate(((1, 2), (0, 2), (0, 1))):
        energy += 0.5 * cot[:, c] * (uv[:, a] - uv[:, b]) ** 2
    tri_vals = energy / mesh.areas
    vert = np.zeros(mesh.vertex_count)
    np.add.at(vert, tri.ravel(), np.repeat(tri_vals * mesh.areas / 3.0, 3))
    vert /= mesh.vertex_areas
    return tri_vals, vert


def export_matrix_market(matrix, path):
    """Dump a sparse matrix as a MatrixMarket coordinate file."""
    from scipy.io import mmwrite
    mmwrite(str(path), matrix if sparse.issparse(matrix) else matrix.matrix)
