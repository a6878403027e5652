"""Manufactured-solution pipeline: exact fields, forcing, error norms, and
convergence-rate tables.

The exact solution
    u1 = x^2 y + sin t,   u2 = -x y^2 + sin t,   p = sin x + sin y
is divergence free, and its local forcing u_t + (u.grad)u - nu Lap u +
grad p is available in closed form.  The nonlocal part of the forcing has
no closed form, so it is lifted discretely: gamma * A applied to the P2
interpolant of the exact velocity at the evaluation time.  The volume
constraint is inhomogeneous (exact values on the halo and boundary).

Pressure is compared after subtracting the exact mean over Omega, since the
discrete pressure carries the zero-mean normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import DofMap, build_dof_map, interpolate, p2_gradients, p2_values, quadrature_rule, triangle_geometry
from .local_assembly import LOCAL_QUADRATURE_DEGREE
from .mesh import OMEGA, Mesh, build_rectangle_mesh
from .nonlocal_assembly import FractionalParams
from .timestepping import (
    COUPLED_IMEX,
    Operators,
    SchemeConfig,
    State,
    build_operators,
    run,
)

ERROR_QUADRATURE_DEGREE = 6

# mean of sin x + sin y over the unit square
EXACT_PRESSURE_MEAN = 2.0 * (1.0 - math.cos(1.0))


class ExactSolution:
    """Closed-form fields and the derivatives the pipeline needs."""

    @staticmethod
    def velocity(t, x, y):
        s = math.sin(t)
        return x * x * y + s, -x * y * y + s

    @staticmethod
    def velocity_t(t, x, y):
        c = math.cos(t)
        return c * np.ones_like(np.asarray(x, dtype=float)), c * np.ones_like(np.asarray(x, dtype=float))

    @staticmethod
    def velocity_grad(t, x, y):
        """Rows (du1/dx, du1/dy), (du2/dx, du2/dy)."""
        return (2.0 * x * y, x * x), (-y * y, -2.0 * x * y)

    @staticmethod
    def velocity_laplacian(t, x, y):
        return 2.0 * y, -2.0 * x

    @staticmethod
    def pressure(x, y):
        return np.sin(x) + np.sin(y)

    @staticmethod
    def pressure_grad(x, y):
        return np.cos(x), np.cos(y)


def local_forcing(t, x, y, nu: float):
    """u_t + (u.grad)u - nu Lap u + grad p of the exact solution."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u1, u2 = ExactSolution.velocity(t, x, y)
    (g1x, g1y), (g2x, g2y) = ExactSolution.velocity_grad(t, x, y)
    l1, l2 = ExactSolution.velocity_laplacian(t, x, y)
    p_x, p_y = ExactSolution.pressure_grad(x, y)
    c = math.cos(t)
    f1 = c + u1 * g1x + u2 * g1y - nu * l1 + p_x
    f2 = c + u1 * g2x + u2 * g2y - nu * l2 + p_y
    return f1, f2


def exact_interpolants(t: float, dofmap: DofMap) -> tuple[np.ndarray, np.ndarray]:
    """P2 nodal interpolants of the exact velocity at time t."""
    x, y = dofmap.p2_coords[:, 0], dofmap.p2_coords[:, 1]
    u1, u2 = ExactSolution.velocity(t, x, y)
    return np.asarray(u1, dtype=float), np.asarray(u2, dtype=float)


def discrete_rhs(t: float, ops: Operators, gamma: float, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """Full manufactured load: quadrature of the local forcing plus the
    discrete nonlocal lifting gamma * A * interpolated exact velocity."""
    from .local_assembly import assemble_load

    fx, fy = assemble_load(lambda tt, x, y: local_forcing(tt, x, y, nu), t, ops.mesh, ops.dofmap, ops.ctx)
    if gamma > 0.0:
        ex, ey = exact_interpolants(t, ops.dofmap)
        fx = fx + gamma * (ops.A.array @ ex)
        fy = fy + gamma * (ops.A.array @ ey)
    return fx, fy


def mms_config(scheme: str, dt: float, t_final: float, nu: float,
               params: FractionalParams, ops: Operators) -> SchemeConfig:
    """SchemeConfig wired to the manufactured forcing and exact volume data."""
    gamma = params.gamma

    def volume_data(t, x, y):
        return ExactSolution.velocity(t, x, y)

    def extra_load(t):
        if gamma == 0.0:
            z = np.zeros(ops.dofmap.n_u)
            return z, z
        ex, ey = exact_interpolants(t, ops.dofmap)
        return gamma * (ops.A.array @ ex), gamma * (ops.A.array @ ey)

    return SchemeConfig(
        scheme=scheme,
        dt=dt,
        t_final=t_final,
        nu=nu,
        fractional=params,
        forcing=lambda t, x, y: local_forcing(t, x, y, nu),
        volume_data=volume_data,
        extra_load=extra_load,
    )


@dataclass
class VariableErrors:
    linf: float
    l2: float
    h1: float


@dataclass
class ErrorRow:
    h: float
    u1: VariableErrors
    u2: VariableErrors
    p: VariableErrors


@dataclass
class ErrorReport:
    rows: list[ErrorRow]

    def rates(self, var: str, norm: str) -> list[float]:
        """log2(e(h)/e(h/2)) between consecutive refinements."""
        errs = [getattr(getattr(r, var), norm) for r in self.rows]
        return [math.log2(errs[k] / errs[k + 1]) for k in range(len(errs) - 1)]

    def to_csv(self) -> str:
        lines = ["h,var,Linf,Linf_rate,L2,L2_rate,H1,H1_rate"]
        for var in ("u1", "u2", "p"):
            prev = None
            for row in self.rows:
                e = getattr(row, var)
                if prev is None:
                    r_inf = r_l2 = r_h1 = ""
                else:
                    r_inf = f"{math.log2(prev.linf / e.linf):.4f}"
                    r_l2 = f"{math.log2(prev.l2 / e.l2):.4f}"
                    r_h1 = f"{math.log2(prev.h1 / e.h1):.4f}"
                lines.append(
                    f"{row.h:.10g},{var},{e.linf:.6e},{r_inf},{e.l2:.6e},{r_l2},{e.h1:.6e},{r_h1}"
                )
                prev = e
        return "\n".join(lines) + "\n"


def error_norms(state: State, t: float, mesh: Mesh, dofmap: DofMap) -> ErrorRow:
    """L-inf, L2, and H1-seminorm errors over Omega at time t.

    L-inf is taken over the quadrature points; the pressure error is
    computed against the mean-shifted exact pressure.
    """
    rule = quadrature_rule(ERROR_QUADRATURE_DEGREE)
    omega = np.nonzero(mesh.region == OMEGA)[0]
    areas, jinv = triangle_geometry(mesh)
    wphys = rule.weights[None, :] * (2.0 * areas[omega][:, None])
    corners = mesh.vertices[mesh.triangles[omega]]
    qp = np.einsum("qv,tvd->tqd", rule.points, corners)
    x, y = qp[:, :, 0], qp[:, :, 1]

    phi2 = p2_values(rule.points)
    grad2 = np.einsum("qij,tjk->tqik", p2_gradients(rule.points), jinv[omega])
    tri_p2 = dofmap.tri_p2[omega]

    u1e, u2e = ExactSolution.velocity(t, x, y)
    (g1x, g1y), (g2x, g2y) = ExactSolution.velocity_grad(t, x, y)

    def velocity_errors(u: np.ndarray, ue, gx, gy) -> VariableErrors:
        u_loc = u[tri_p2]
        uh = np.einsum("qi,ti->tq", phi2, u_loc)
        gh = np.einsum("tqid,ti->tqd", grad2, u_loc)
        diff = uh - ue
        gdiff = np.stack([gh[:, :, 0] - gx, gh[:, :, 1] - gy], axis=-1)
        l2 = math.sqrt(float((wphys * diff**2).sum()))
        h1 = math.sqrt(float((wphys * (gdiff**2).sum(-1)).sum()))
        return VariableErrors(float(np.abs(diff).max()), l2, h1)

    e1 = velocity_errors(state.ux, u1e, g1x, g1y)
    e2 = velocity_errors(state.uy, u2e, g2x, g2y)

    # pressure: P1 field vs exact minus its Omega mean
    tri_p1 = dofmap.tri_p1[omega]
    ph = np.einsum("qi,ti->tq", rule.points, state.p[tri_p1])
    pe = ExactSolution.pressure(x, y) - EXACT_PRESSURE_MEAN
    pdiff = ph - pe
    gp = np.stack(ExactSolution.pressure_grad(x, y), axis=-1)
    gref1 = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grad1 = np.einsum("ij,tjk->tik", gref1, jinv[omega])  # constant per triangle
    gph = np.einsum("tid,ti->td", grad1, state.p[tri_p1])
    gpdiff = gph[:, None, :] - gp
    ep = VariableErrors(
        float(np.abs(pdiff).max()),
        math.sqrt(float((wphys * pdiff**2).sum())),
        math.sqrt(float((wphys * (gpdiff**2).sum(-1)).sum())),
    )
    return ErrorRow(h=mesh.mesh_size, u1=e1, u2=e2, p=ep)


DT_EQ_H = "h"
DT_EQ_H2 = "h2"


def convergence_study(
    h_list,
    dt_mode: str,
    scheme: str = COUPLED_IMEX,
    alpha: float = 0.5,
    gamma: float = 1.0,
    lam: float = 1.0,
    nu: float = 1.0,
    t_final: float = 0.5,
    pair_quadrature_degree: int = 3,
    diagonal_refinement_levels: int = 4,
) -> ErrorReport:
    """Run the fully discrete scheme per refinement and tabulate errors.

    h values must be 1/n with integral lam*n; dt is h or h^2 per dt_mode.
    """
    if dt_mode not in (DT_EQ_H, DT_EQ_H2):
        raise ValueError(f"dt_mode must be '{DT_EQ_H}' or '{DT_EQ_H2}', got {dt_mode!r}")
    hs = list(h_list)
    if any(hs[k + 1] >= hs[k] for k in range(len(hs) - 1)):
        raise ValueError("h_list must be strictly decreasing")
    rows = []
    for h in hs:
        n = round(1.0 / h)
        if abs(n * h - 1.0) > 1e-12:
            raise ValueError(f"h = {h} is not the reciprocal of an integer")
        dt = h if dt_mode == DT_EQ_H else h * h
        params = FractionalParams(
            alpha=alpha,
            gamma=gamma,
            lam=lam,
            pair_quadrature_degree=pair_quadrature_degree,
            diagonal_refinement_levels=diagonal_refinement_levels,
        )
        mesh = build_rectangle_mesh(n, lam)
        dofmap = build_dof_map(mesh)
        ops = build_operators(mesh, params, dofmap)
        config = mms_config(scheme, dt, t_final, nu, params, ops)
        ux0, uy0 = exact_interpolants(0.0, dofmap)
        initial = State(0.0, ux0, uy0, np.zeros(dofmap.n_p))
        _, final = run(config, mesh, initial, operators=ops)
        rows.append(error_norms(final, t_final, mesh, dofmap))
    return ErrorReport(rows)
