"""Sphere frames: eigenfunction families with pointwise squared sum ~ 1.

Selecting the family reduces to a tiny PSD least-squares problem over the
Gram coefficient matrix Q on the eigenspace basis; the resulting map
phi = (u_1, ..., u_l) is tested for harmonicity via its discrete tension field.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fem import DensityField, assemble_mass, assemble_stiffness, gradient_field

# Dunavant 6-point rule, exact for quartics on the reference triangle.
_QP = np.array([
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
])
_QW = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)


class FrameError(RuntimeError):
    pass


@dataclass(frozen=True)
class SphereFrame:
    """Selected eigenfunctions and the candidate sphere map they define."""
    ell: int                  # numerical rank of Q
    U: np.ndarray             # (V, ell) selected eigenfunctions
    Q: np.ndarray             # (m, m) PSD coefficient matrix on the input basis
    w: np.ndarray             # (V,) pointwise sum of squares
    lam: float                # cluster eigenvalue
    objective: float          # final value of the sphere-constraint least squares
    attained: bool            # False when the objective stagnated above threshold


def _quad_values(basis, mesh):
    """Basis values at all quadrature points, plus area-scaled weights."""
    tri = mesh.triangles
    corner = basis[tri]                       # (F, 3, m)
    vals = np.einsum("qc,fcm->fqm", _QP, corner)  # (F, 6, m)
    weights = np.outer(mesh.areas, _QW)            # (F, 6)
    m = basis.shape[1]
    return vals.reshape(-1, m), weights.ravel()


def _psd_clip(Q):
    w, P = np.linalg.eigh(0.5 * (Q + Q.T))
    w = np.clip(w, 0.0, None)
    return (P * w) @ P.T


def select_frame(basis, mesh, density, max_iters=2000, stagnation_tol=1e-3):
    """Pick Q >= 0 minimizing the exact integral of (sum Q_ab v_a v_b - 1)^2.

    Projected gradient on the PSD cone with Armijo backtracking; the quartic
    objective is integrated exactly per triangle. The soft mass constraint
    int w mu dA <= 1 + 1e-6 is enforced by rescaling.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[1] == 0:
        raise FrameError("empty eigenbasis")
    m = basis.shape[1]
    Vq, wq = _quad_values(basis, mesh)

    def objective(Q):
        s = np.einsum("qa,ab,qb->q", Vq, Q, Vq) - 1.0
        return float(wq @ s ** 2), s

    def gradient(s):
        return 2.0 * (Vq * (wq * s)[:, None]).T @ Vq

    Q = np.eye(m) / m
    f, s = objective(Q)
    alpha = 1.0 / max(f, 1.0)
    for _ in range(max_iters):
        G = gradient(s)
        accepted = False
        for _ in range(40):
            Qn = _psd_clip(Q - alpha * G)
            fn, sn = objective(Qn)
            step2 = float(np.sum((Qn - Q) ** 2))
            if step2 == 0.0:
                break
            if fn <= f - 1e-4 / alpha * step2:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        rel_drop = (f - fn) / max(f, 1e-300)
        Q, f, s = Qn, fn, sn
        alpha *= 1.5
        if rel_drop < 1e-15:
            break

    mu = density.values if isinstance(density, DensityField) else np.asarray(density, float)
    Mmu = assemble_mass(mesh, mu).matrix
    Gm = basis.T @ (Mmu @ basis)
    mass_w = float(np.sum(Q * Gm))
    if mass_w > 1.0 + 1e-6:
        Q = Q / mass_w
        f, _ = objective(Q)

    attained = f <= stagnation_tol * mesh.area
    if not attained:
        warnings.warn("sphere constraint unattained", RuntimeWarning)

    d, P = np.linalg.eigh(Q)
    keep = d > 1e-8 * max(d.max(), 0.0)
    if not np.any(keep):
        raise FrameError("coefficient matrix vanished")
    U = basis @ (P[:, keep] * np.sqrt(d[keep]))
    w = np.einsum("va,ab,vb->v", basis, Q, basis)
    return SphereFrame(ell=int(keep.sum()), U=U, Q=Q, w=w,
                       lam=float("nan"), objective=f, attained=attained)


def with_eigenvalue(frame, lam):
    return SphereFrame(frame.ell, frame.U, frame.Q, frame.w, float(lam),
                       frame.objective, frame.attained)


def harmonic_residual(mesh, frame, density, w_floor=1e-6):
    """Discrete tension-field test of the normalized map phi / sqrt(w).

    weak_residual aggregates all components in the Frobenius norm (this makes
    the figure invariant under global rotations of the frame, which the
    per-component maximum is not). identity_residual checks the weak form of
    sum_i u_i (-Delta u_i) = sum_i |grad u_i|^2 in L^1.
    """
    w = frame.w
    degenerate = w <= w_floor * max(w.max(), 1.0)
    if degenerate.mean() > 0.01:
        raise FrameError("map degenerate: w = 0 on more than 1% of vertices")
    good = ~degenerate
    phi = np.zeros_like(frame.U)
    phi[good] = frame.U[good] / np.sqrt(w[good])[:, None]

    K = assemble_stiffness(mesh).matrix
    rho = np.zeros(mesh.vertex_count)
    for j in range(frame.ell):
        rho += gradient_field(mesh, phi[:, j])[1]
    Mplain = assemble_mass(mesh, np.ones(mesh.vertex_count)).matrix

    Kphi = K @ phi
    R = Kphi - rho[:, None] * (Mplain @ phi)
    weak = float(np.linalg.norm(R[good]) / np.linalg.norm(Kphi[good]))

    # identity residual on the raw (unnormalized) frame
    a = np.einsum("vi,vi->v", frame.U, K @ frame.U)
    b = np.zeros(mesh.vertex_count)
    for i in range(frame.ell):
        b += gradient_field(mesh, frame.U[:, i])[1]
    b *= mesh.vertex_areas
    identity = float(np.abs(a - b).sum() / np.abs(b).sum())
    return {"weak_residual": weak, "identity_residual": identity}


def recover_density(mesh, frame):
    """Raw density candidate: sum of squared gradients over the eigenvalue.

    Area-renormalized to unit mass; deliberately not box-clipped.
    """
    if not frame.lam > 0:
        raise FrameError("frame carries no positive eigenvalue")
    vert = np.zeros(mesh.vertex_count)
    for i in range(frame.ell):
        vert += gradient_field(mesh, frame.U[:, i])[1]
    vert /= frame.lam
    vert /= mesh.vertex_areas @ vert
    return DensityField(mesh, vert)


def export_frame_json(frame, path):
    import json
    from pathlib import Path
    Path(path).write_text(json.dumps({
        "ell": frame.ell,
        "eigenvalue": frame.lam,
        "Q": frame.Q.tolist(),
        "U": frame.U.tolist(),
        "w": frame.w.tolist(),
        "objective": frame.objective,
    }))
