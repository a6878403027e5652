"""Direct linear solvers: the bordered velocity-pressure saddle system and
the SPD Stage-2 correction system.

The pressure zero-mean condition is enforced with a Lagrange multiplier row
(the integral of each pressure basis function), which keeps the saddle
system symmetric and also absorbs the O(h^2) mass defect of interpolated
inhomogeneous boundary data.  Everything is solved by dense LAPACK
factorizations; at desk scale robustness beats iterative tuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


class SolverError(RuntimeError):
    """Factorization or solve failure with a diagnostic hint."""


@dataclass
class SaddleSystem:
    """Assembled blocks of one velocity-pressure solve.

    vel_block : (2 n_i, 2 n_i) dense matrix on unconstrained velocity dofs
    div_block : (n_p, 2 n_i) divergence rows restricted to those dofs
    mean_row : (n_p,) integrals of the pressure basis functions
    rhs_vel : (2 n_i,) momentum right side (lifting already applied)
    rhs_div : (n_p,) divergence data, i.e. -B_constrained g
    """

    vel_block: np.ndarray
    div_block: np.ndarray
    mean_row: np.ndarray
    rhs_vel: np.ndarray
    rhs_div: np.ndarray

    def full_matrix(self) -> np.ndarray:
        nv = self.vel_block.shape[0]
        n_p = self.mean_row.shape[0]
        n = nv + n_p + 1
        k = np.zeros((n, n))
        k[:nv, :nv] = self.vel_block
        b = self.div_block.toarray() if sp.issparse(self.div_block) else self.div_block
        k[nv : nv + n_p, :nv] = -b
        k[:nv, nv : nv + n_p] = -b.T
        k[nv : nv + n_p, -1] = self.mean_row
        k[-1, nv : nv + n_p] = self.mean_row
        return k

    def full_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_vel, -self.rhs_div, [0.0]])


def solve_saddle(system: SaddleSystem) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the bordered saddle system; returns (velocity, pressure, mu).

    The returned pressure has exact (to roundoff) zero weighted mean.
    """
    nv = system.vel_block.shape[0]
    n_p = system.mean_row.shape[0]
    if nv == 0:
        raise SolverError("saddle system has no unconstrained velocity dofs (empty interior)")
    k = system.full_matrix()
    rhs = system.full_rhs()
    try:
        sol = sla.lu_solve(sla.lu_factor(k), rhs)
    except (sla.LinAlgError, ValueError) as exc:
        raise SolverError(f"saddle factorization failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SolverError(
            "singular saddle system (inf-sup violation or empty interior)"
        )
    return sol[:nv], sol[nv : nv + n_p], float(sol[-1])


def saddle_residual(system: SaddleSystem, u: np.ndarray, p: np.ndarray, mu: float) -> float:
    """Relative residual of the full block system."""
    sol = np.concatenate([u, p, [mu]])
    rhs = system.full_rhs()
    r = system.full_matrix() @ sol - rhs
    scale = max(np.linalg.norm(rhs), 1e-30)
    return float(np.linalg.norm(r) / scale)


class Stage2Solver:
    """Cached Cholesky solver for (M + 2 dt gamma A) u = M w + 2 dt gamma A u_prev.

    Built once per (operators, dt, gamma) and reused across time steps; the
    factorization lives on the unconstrained dofs, constrained values are
    lifted to the right-hand side.
    """

    def __init__(self, mass: sp.csr_matrix, a_frac: np.ndarray, interior: np.ndarray,
                 constrained: np.ndarray, dt: float, gamma: float):
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        if gamma < 0.0:
            raise ValueError(f"gamma must be nonnegative, got {gamma}")
        self.mass = mass
        self.a_frac = a_frac
        self.interior = interior
        self.constrained = constrained
        self.dt = dt
        self.gamma = gamma
        if gamma > 0.0:
            ii = np.ix_(interior, interior)
            sys = mass[interior][:, interior].toarray() + (2.0 * dt * gamma) * a_frac[ii]
            try:
                self._chol = sla.cho_factor(sys)
            except sla.LinAlgError as exc:
                raise SolverError(
                    f"stage-2 system is not positive definite: {exc}; "
                    "the nonlocal operator's PSD invariant is broken upstream"
                ) from exc
        else:
            self._chol = None

    def solve(self, w: np.ndarray, u_prev: np.ndarray, g_next: np.ndarray | None = None) -> np.ndarray:
        """Advance one component: full-length w and u_prev in, full-length
        u out, with constrained dofs set to g_next (zero by default)."""
        if self.gamma == 0.0:
            return w.copy()
        u_ext = np.zeros_like(w)
        if g_next is not None:
            u_ext[self.constrained] = g_next[self.constrained]
        c = 2.0 * self.dt * self.gamma
        rhs = self.mass @ (w - u_ext) + c * (self.a_frac @ (u_prev - u_ext))
        u = u_ext
        u[self.interior] = sla.cho_solve(self._chol, rhs[self.interior])
        return u


def solve_stage2(mass: sp.csr_matrix, a_frac, dt: float, gamma: float,
                 w: np.ndarray, u_prev: np.ndarray,
                 interior: np.ndarray | None = None) -> np.ndarray:
    """One-shot homogeneous Stage-2 solve (see Stage2Solver for the cached
    form used inside time loops)."""
    arr = a_frac.array if hasattr(a_frac, "array") else a_frac
    n = w.shape[0]
    if interior is None:
        interior = np.arange(n)
    constrained = np.setdiff1d(np.arange(n), interior)
    return Stage2Solver(mass, arr, interior, constrained, dt, gamma).solve(w, u_prev)
