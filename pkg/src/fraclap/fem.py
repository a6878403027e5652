"""Taylor-Hood P2-P1 reference elements, quadrature, and dof bookkeeping.

Velocity components live in the continuous piecewise-quadratic space over
the whole meshed region (Omega plus halo); pressure lives in the continuous
piecewise-linear space over the closure of Omega.  Velocity dofs whose node
falls outside the open unit square are "constrained": they carry prescribed
volume-constraint data rather than unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import OMEGA, Mesh, MeshError, validate_mesh

# Dunavant rules on the reference triangle {x>=0, y>=0, x+y<=1}, barycentric
# points and weights normalized to sum to the triangle area 1/2.  Degree 3
# maps to the 6-point degree-4 rule: the classical 4-point degree-3 rule has
# a negative centroid weight, which we exclude by contract.
_D1 = [(1 / 3, 1 / 3, 1 / 3, 1.0)]
_D2 = [
    (2 / 3, 1 / 6, 1 / 6, 1 / 3),
    (1 / 6, 2 / 3, 1 / 6, 1 / 3),
    (1 / 6, 1 / 6, 2 / 3, 1 / 3),
]


def _sym3(a: float, w: float):
    b = 1.0 - 2.0 * a
    return [(b, a, a, w), (a, b, a, w), (a, a, b, w)]


def _sym6(a: float, b: float, w: float):
    c = 1.0 - a - b
    return [(a, b, c, w), (a, c, b, w), (b, a, c, w), (b, c, a, w), (c, a, b, w), (c, b, a, w)]


_D4 = _sym3(0.445948490915965, 0.223381589678011) + _sym3(
    0.091576213509771, 0.109951743655322
)
_D5 = (
    [(1 / 3, 1 / 3, 1 / 3, 0.225)]
    + _sym3(0.470142064105115, 0.132394152788506)
    + _sym3(0.101286507323456, 0.125939180544827)
)
_D6 = (
    _sym3(0.249286745170910, 0.116786275726379)
    + _sym3(0.063089014491502, 0.050844906370207)
    + _sym6(0.310352451033785, 0.636502499121399, 0.082851075618374)
)

_RULES = {1: _D1, 2: _D2, 3: _D4, 4: _D4, 5: _D5, 6: _D6}


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates; weights sum to 1/2."""

    degree: int
    points: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)


def quadrature_rule(degree: int) -> QuadratureRule:
    """Symmetric positive-weight Gauss rule exact to the given total degree."""
    if degree not in _RULES:
        raise ValueError(f"unsupported quadrature degree {degree}; supported: 1..6")
    table = np.asarray(_RULES[degree])
    return QuadratureRule(degree, np.ascontiguousarray(table[:, :3]), 0.5 * table[:, 3])


def offset_quadrature_rule(degree: int) -> QuadratureRule:
    """A rule of at least the same exactness whose point set is disjoint
    from quadrature_rule(degree)'s.  Used on identical-triangle pairs so
    that no quadrature point pair ever lands on x = y."""
    alt = {1: 2, 2: 3, 3: 5, 4: 5, 5: 6, 6: 5}
    if degree not in alt:
        raise ValueError(f"unsupported quadrature degree {degree}; supported: 1..6")
    return quadrature_rule(alt[degree])


def reference_basis_p2(bary) -> tuple[np.ndarray, np.ndarray]:
    """P2 Lagrange basis at one barycentric point.

    Returns (values (6,), gradients (6, 2)) with gradients taken with
    respect to the reference coordinates (xi, eta) where the barycentric
    coordinates are (1-xi-eta, xi, eta).  Local node order: the three
    vertices, then the midpoints of edges (0,1), (1,2), (2,0).
    """
    bary = np.asarray(bary, dtype=float)
    values = p2_values(bary[None, :])[0]
    grads = p2_gradients(bary[None, :])[0]
    return values, grads


def reference_basis_p1(bary) -> tuple[np.ndarray, np.ndarray]:
    """P1 Lagrange basis: values are the barycentric coordinates themselves."""
    bary = np.asarray(bary, dtype=float)
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return bary.copy(), grads


def p2_values(bary: np.ndarray) -> np.ndarray:
    """Vectorized P2 values, bary (m, 3) -> (m, 6)."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ],
        axis=1,
    )


P2_REFERENCE_HESSIANS = np.array(
    [
        [[4.0, 4.0], [4.0, 4.0]],
        [[4.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 4.0]],
        [[-8.0, -4.0], [-4.0, 0.0]],
        [[0.0, 4.0], [4.0, 0.0]],
        [[0.0, -4.0], [-4.0, -8.0]],
    ]
)
"""Constant reference-coordinate Hessians of the six P2 basis functions."""


def p2_gradients(bary: np.ndarray) -> np.ndarray:
    """Vectorized P2 reference gradients, bary (m, 3) -> (m, 6, 2).

    dL/d(xi,eta) = [[-1,-1],[1,0],[0,1]]; chain rule on the barycentric form.
    """
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    m = bary.shape[0]
    g = np.empty((m, 6, 2))
    d0 = 4 * l0 - 1
    d1 = 4 * l1 - 1
    d2 = 4 * l2 - 1
    g[:, 0, 0] = -d0
    g[:, 0, 1] = -d0
    g[:, 1, 0] = d1
    g[:, 1, 1] = 0.0
    g[:, 2, 0] = 0.0
    g[:, 2, 1] = d2
    g[:, 3, 0] = 4 * (l0 - l1)
    g[:, 3, 1] = -4 * l1
    g[:, 4, 0] = 4 * l2
    g[:, 4, 1] = 4 * l1
    g[:, 5, 0] = -4 * l2
    g[:, 5, 1] = 4 * (l0 - l2)
    return g


@dataclass(frozen=True)
class DofMap:
    """Dof numbering for one P2 velocity component and the P1 pressure.

    P2 dofs: mesh vertices first (same index), then edge midpoints ordered
    by the lexicographically sorted (min, max) vertex pair, so two builds of
    the same mesh number dofs identically.
    """

    n_u: int
    n_p: int
    tri_p2: np.ndarray  # (nt, 6) global P2 dofs per triangle
    p2_coords: np.ndarray  # (n_u, 2) node coordinates
    constrained: np.ndarray  # sorted dof indices with node outside open Omega
    interior: np.ndarray  # complement of constrained
    pressure_vertices: np.ndarray  # mesh vertex index of each pressure dof
    tri_p1: np.ndarray  # (nt,) rows: pressure dofs of OMEGA triangles, -1 rows elsewhere
    is_constrained: np.ndarray = field(repr=False, default=None)


def build_dof_map(mesh: Mesh, tol: float = 1e-12) -> DofMap:
    """Number P2 velocity and P1 pressure dofs; classify constrained dofs."""
    validate_mesh(mesh)
    nv = mesh.num_vertices
    edges = mesh.edges()
    edge_rank = {(int(a), int(b)): nv + r for r, (a, b) in enumerate(edges)}

    nt = mesh.num_triangles
    tri_p2 = np.empty((nt, 6), dtype=np.int64)
    tri_p2[:, :3] = mesh.triangles
    for t in range(nt):
        i, j, k = mesh.triangles[t]
        for c, (a, b) in enumerate(((i, j), (j, k), (k, i))):
            key = (int(min(a, b)), int(max(a, b)))
            tri_p2[t, 3 + c] = edge_rank[key]

    n_u = nv + edges.shape[0]
    p2_coords = np.empty((n_u, 2))
    p2_coords[:nv] = mesh.vertices
    p2_coords[nv:] = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    inside = np.all((p2_coords > tol) & (p2_coords < 1 - tol), axis=1)
    constrained = np.nonzero(~inside)[0]
    interior = np.nonzero(inside)[0]

    on_closure = np.all((mesh.vertices > -tol) & (mesh.vertices < 1 + tol), axis=1)
    pressure_vertices = np.nonzero(on_closure)[0]
    p_rank = -np.ones(nv, dtype=np.int64)
    p_rank[pressure_vertices] = np.arange(pressure_vertices.size)

    tri_p1 = -np.ones((nt, 3), dtype=np.int64)
    omega_tris = np.nonzero(mesh.region == OMEGA)[0]
    tri_p1[omega_tris] = p_rank[mesh.triangles[omega_tris]]
    if np.any(tri_p1[omega_tris] < 0):
        raise MeshError("an OMEGA triangle has a vertex outside the closure of Omega")

    is_con = np.zeros(n_u, dtype=bool)
    is_con[constrained] = True
    return DofMap(
        n_u=n_u,
        n_p=pressure_vertices.size,
        tri_p2=tri_p2,
        p2_coords=p2_coords,
        constrained=constrained,
        interior=interior,
        pressure_vertices=pressure_vertices,
        tri_p1=tri_p1,
        is_constrained=is_con,
    )


@dataclass
class CoefficientVector:
    """Nodal coefficients in DofMap ordering with a role tag."""

    values: np.ndarray
    role: str  # velocity-x | velocity-y | pressure

    def copy(self) -> "CoefficientVector":
        return CoefficientVector(self.values.copy(), self.role)


def interpolate(f, space: str, mesh: Mesh, dofmap: DofMap, role: str = "") -> CoefficientVector:
    """Nodal interpolation of a scalar field f(x, y) into P2 or P1."""
    if space == "p2":
        coords = dofmap.p2_coords
        role = role or "velocity-x"
    elif space == "p1":
        coords = mesh.vertices[dofmap.pressure_vertices]
        role = role or "pressure"
    else:
        raise ValueError(f"space must be 'p2' or 'p1', got {space!r}")
    values = np.asarray(f(coords[:, 0], coords[:, 1]), dtype=float)
    values = np.broadcast_to(values, (coords.shape[0],)).copy()
    return CoefficientVector(values, role)


def triangle_geometry(mesh: Mesh):
    """Per-triangle affine data: areas (nt,), inverse Jacobians (nt, 2, 2).

    The map from reference (xi, eta) to physical x is x = v0 + J [xi, eta];
    physical gradients are grad_ref @ Jinv.
    """
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    return 0.5 * det, inv
