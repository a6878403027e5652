"""Sparse local operators over the OMEGA triangles.

All local forms (mass, viscous stiffness, pressure/divergence coupling,
skew convection, loads) integrate over Omega only; the halo participates
solely in the nonlocal operator.  Element contributions are computed
vectorized over triangles and scattered in fixed triangle order, so
repeated assembly on the same mesh is reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import DofMap, p2_gradients, p2_values, quadrature_rule, triangle_geometry
from .mesh import OMEGA, Mesh

LOCAL_QUADRATURE_DEGREE = 4  # integrates P2 x P2 mass terms exactly


@dataclass
class SparseOperator:
    """CSR-backed operator with a declared symmetry flag."""

    matrix: sp.csr_matrix
    symmetric: bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def symmetry_defect(self) -> float:
        """Max |A - A^T| entry; 0 for exactly symmetric assembly."""
        d = self.matrix - self.matrix.T
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


class LocalContext:
    """Precomputed per-mesh quadrature data shared by all local forms."""

    def __init__(self, mesh: Mesh, dofmap: DofMap, degree: int = LOCAL_QUADRATURE_DEGREE):
        self.mesh = mesh
        self.dofmap = dofmap
        rule = quadrature_rule(degree)
        omega = np.nonzero(mesh.region == OMEGA)[0]
        self.omega = omega
        areas, jinv = triangle_geometry(mesh)
        self.areas = areas[omega]
        self.tri_p2 = dofmap.tri_p2[omega]
        self.tri_p1 = dofmap.tri_p1[omega]
        self.phi2 = p2_values(rule.points)  # (nq, 6)
        self.phi1 = rule.points.copy()  # (nq, 3)
        gref = p2_gradients(rule.points)
        self.grad2 = np.einsum("qij,tjk->tqik", gref, jinv[omega])  # (T, nq, 6, 2)
        corners = mesh.vertices[mesh.triangles[omega]]
        self.qpoints = np.einsum("qv,tvd->tqd", rule.points, corners)  # (T, nq, 2)
        self.wphys = rule.weights[None, :] * (2.0 * self.areas[:, None])  # (T, nq)


def _scatter(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return m.tocsr()


def _scatter_square(ctx: LocalContext, elem: np.ndarray) -> sp.csr_matrix:
    n = ctx.dofmap.n_u
    rows = np.repeat(ctx.tri_p2[:, :, None], 6, axis=2)
    cols = np.repeat(ctx.tri_p2[:, None, :], 6, axis=1)
    return _scatter(rows, cols, elem, (n, n))


def assemble_mass(mesh: Mesh, dofmap: DofMap, ctx: LocalContext | None = None) -> SparseOperator:
    """P2 scalar mass matrix over Omega; applied blockwise per component."""
    ctx = ctx or LocalContext(mesh, dofmap)
    elem = np.einsum("tq,qi,qj->tij", ctx.wphys, ctx.phi2, ctx.phi2)
    return SparseOperator(_scatter_square(ctx, elem), symmetric=True)


def assemble_stiffness(mesh: Mesh, dofmap: DofMap, ctx: LocalContext | None = None) -> SparseOperator:
    """P2 scalar stiffness (grad-grad) matrix over Omega."""
    ctx = ctx or LocalContext(mesh, dofmap)
    elem = np.einsum("tq,tqid,tqjd->tij", ctx.wphys, ctx.grad2, ctx.grad2)
    return SparseOperator(_scatter_square(ctx, elem), symmetric=True)


def assemble_divergence(mesh: Mesh, dofmap: DofMap, ctx: LocalContext | None = None) -> SparseOperator:
    """Pressure-by-velocity block B with (B u)_q = int (div u) q dx.

    Shape (n_p, 2 n_u): x-component columns first, then y-component.
    """
    ctx = ctx or LocalContext(mesh, dofmap)
    n_u, n_p = dofmap.n_u, dofmap.n_p
    rows = np.repeat(ctx.tri_p1[:, :, None], 6, axis=2)
    cols = np.repeat(ctx.tri_p2[:, None, :], 3, axis=1)
    bx = np.einsum("tq,qi,tqj->tij", ctx.wphys, ctx.phi1, ctx.grad2[:, :, :, 0])
    by = np.einsum("tq,qi,tqj->tij", ctx.wphys, ctx.phi1, ctx.grad2[:, :, :, 1])
    mx = _scatter(rows, cols, bx, (n_p, n_u))
    my = _scatter(rows, cols, by, (n_p, n_u))
    return SparseOperator(sp.hstack([mx, my]).tocsr(), symmetric=False)


def assemble_convection(
    ux: np.ndarray,
    uy: np.ndarray,
    mesh: Mesh,
    dofmap: DofMap,
    ctx: LocalContext | None = None,
) -> SparseOperator:
    """Explicitly skew-symmetrized convection operator N(u_prev).

    Builds the scalar block of 0.5 (u_prev . grad v, w) - 0.5 (u_prev .
    grad w, v); it acts identically on each velocity component.  The
    element matrices are skew by construction, so v^T N v = 0 up to
    roundoff for every v.
    """
    ctx = ctx or LocalContext(mesh, dofmap)
    u_loc = np.stack([ux[ctx.tri_p2], uy[ctx.tri_p2]], axis=2)  # (T, 6, 2)
    uq = np.einsum("qi,tid->tqd", ctx.phi2, u_loc)  # (T, nq, 2)
    conv = np.einsum("tqd,tqjd->tqj", uq, ctx.grad2)  # u . grad(phi_j)
    g = np.einsum("tq,tqj,qi->tij", ctx.wphys, conv, ctx.phi2)
    elem = 0.5 * (g - g.transpose(0, 2, 1))
    return SparseOperator(_scatter_square(ctx, elem), symmetric=False)


def assemble_load(
    f, t: float, mesh: Mesh, dofmap: DofMap, ctx: LocalContext | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise load vectors int f(t, x) . phi_i dx over Omega.

    f(t, x, y) must return a pair of arrays broadcast against x, y.
    """
    ctx = ctx or LocalContext(mesh, dofmap)
    x, y = ctx.qpoints[:, :, 0], ctx.qpoints[:, :, 1]
    f1, f2 = f(t, x, y)
    f1 = np.broadcast_to(f1, x.shape)
    f2 = np.broadcast_to(f2, x.shape)
    out = []
    for comp in (f1, f2):
        elem = np.einsum("tq,tq,qi->ti", ctx.wphys, comp, ctx.phi2)
        vec = np.zeros(dofmap.n_u)
        np.add.at(vec, ctx.tri_p2, elem)
        out.append(vec)
    return out[0], out[1]


def assemble_pressure_mass(mesh: Mesh, dofmap: DofMap, ctx: LocalContext | None = None) -> SparseOperator:
    """P1 pressure mass matrix over Omega."""
    ctx = ctx or LocalContext(mesh, dofmap)
    elem = np.einsum("tq,qi,qj->tij", ctx.wphys, ctx.phi1, ctx.phi1)
    rows = np.repeat(ctx.tri_p1[:, :, None], 3, axis=2)
    cols = np.repeat(ctx.tri_p1[:, None, :], 3, axis=1)
    n_p = dofmap.n_p
    return SparseOperator(_scatter(rows, cols, elem, (n_p, n_p)), symmetric=True)


def pressure_mean_vector(mesh: Mesh, dofmap: DofMap, ctx: LocalContext | None = None) -> np.ndarray:
    """Vector m with m_q = int phi_q dx; m^T p is the mean-value constraint."""
    ctx = ctx or LocalContext(mesh, dofmap)
    elem = np.einsum("tq,qi->ti", ctx.wphys, ctx.phi1)
    m = np.zeros(dofmap.n_p)
    np.add.at(m, ctx.tri_p1, elem)
    return m
