"""Structured triangulations of the unit square and its interaction halo.

The computational domain is Omega = [0,1]^2.  Because the diffusion operator
is nonlocal, the solution must also be prescribed on a halo of width
``lam`` surrounding Omega (the volume constraint).  We mesh the square
superset [-lam, 1+lam]^2: kernel pairs beyond distance ``lam`` are cut off
pointwise during assembly, so meshing the rounded-corner halo exactly would
change no assembled entry while complicating the generator.

Every cell of the uniform grid is split along the lower-left to upper-right
diagonal, which makes the triangulation (and hence every assembled operator)
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OMEGA = 0
HALO = 1

_TAG_NAMES = {OMEGA: "omega", HALO: "halo"}
_TAG_VALUES = {v: k for k, v in _TAG_NAMES.items()}

_HEADER = "fraclap-mesh v1"


class MeshError(ValueError):
    """Invalid mesh construction parameters or violated mesh invariants."""


class MeshParseError(MeshError):
    """Malformed mesh file; carries the offending 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of Omega union its halo.

    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise vertex indices
    region : (nt,) int array of OMEGA/HALO tags
    mesh_size : max edge length h
    halo_width : lam >= 0
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    mesh_size: float
    halo_width: float

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_coords(self, t: int) -> np.ndarray:
        """(3, 2) vertex coordinates of triangle t."""
        return self.vertices[self.triangles[t]]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self) -> np.ndarray:
        """All unique undirected edges as sorted (a, b) index pairs."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)


def build_rectangle_mesh(n: int, lam: float) -> Mesh:
    """Uniform triangulation of [-lam, 1+lam]^2 with n cells per unit length.

    Requires lam * n to be an integer so that the halo is resolved by whole
    cells and the boundary of Omega coincides with mesh edges.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    if lam < 0:
        raise MeshError(f"halo width must be nonnegative, got {lam}")
    m_float = lam * n
    m = int(round(m_float))
    if abs(m_float - m) > 1e-9:
        raise MeshError(
            f"lam*n = {m_float} is not an integer; the halo would not "
            "conform to the boundary of Omega"
        )

    ncells = n + 2 * m
    idx = np.arange(ncells + 1)
    coords = (idx - m) / n
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xs.ravel(), ys.ravel()])

    def vid(i, j):
        return j * (ncells + 1) + i

    triangles = np.empty((2 * ncells * ncells, 3), dtype=np.int64)
    region = np.empty(2 * ncells * ncells, dtype=np.int64)
    k = 0
    for j in range(ncells):
        inside_y = m <= j < m + n
        for i in range(ncells):
            tag = OMEGA if (inside_y and m <= i < m + n) else HALO
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            triangles[k] = (v00, v10, v11)
            triangles[k + 1] = (v00, v11, v01)
            region[k] = region[k + 1] = tag
            k += 2

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        mesh_size=_max_edge_length(vertices, triangles),
        halo_width=m / n,
    )
    validate_mesh(mesh)
    return mesh


def _max_edge_length(vertices: np.ndarray, triangles: np.ndarray) -> float:
    p = vertices[triangles]
    lengths = [
        np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in ((0, 1), (1, 2), (2, 0))
    ]
    return float(np.max(lengths))


def validate_mesh(mesh: Mesh, tol: float = 1e-12) -> None:
    """Check orientation, conformity, region tags, and the h invariant."""
    areas = mesh.signed_areas()
    bad = np.nonzero(areas <= 0)[0]
    if bad.size:
        raise MeshError(f"triangle {bad[0]} is not counterclockwise (area {areas[bad[0]]})")
    for t in range(mesh.num_triangles):
        if len(set(mesh.triangles[t])) != 3:
            raise MeshError(f"triangle {t} has repeated vertices")

    t = mesh.triangles
    e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    if counts.max() > 2:
        raise MeshError("non-conforming mesh: an edge is shared by more than two triangles")

    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    inside = np.all((centroids > -tol) & (centroids < 1 + tol), axis=1)
    omega = mesh.region == OMEGA
    if np.any(omega & ~inside):
        raise MeshError("an OMEGA triangle lies outside the closed unit square")
    strictly_inside = np.all((centroids > tol) & (centroids < 1 - tol), axis=1)
    if np.any(~omega & strictly_inside):
        raise MeshError("a HALO triangle lies inside the open unit square")

    h = _max_edge_length(mesh.vertices, mesh.triangles)
    if abs(h - mesh.mesh_size) > tol * max(1.0, h):
        raise MeshError(f"mesh_size {mesh.mesh_size} does not match max edge length {h}")


def save_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text format: header, counts, vertices, triangles."""
    with open(path, "w") as f:
        f.write(_HEADER + "\n")
        f.write(f"{mesh.num_vertices} {mesh.num_triangles}\n")
        for x, y in mesh.vertices:
            f.write(f"{x!r} {y!r}\n")
        for t in range(mesh.num_triangles):
            i, j, k = mesh.triangles[t]
            f.write(f"{i} {j} {k} {_TAG_NAMES[int(mesh.region[t])]}\n")


def load_mesh(path) -> Mesh:
    """Read a mesh file, validating structure and invariants.

    mesh_size is recomputed from the geometry; halo_width is recovered as
    the extent of the grid beyond the unit square (0 when there is no halo).
    """
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise MeshParseError(1, "empty file")
    if lines[0].strip() != _HEADER:
        raise MeshParseError(1, f"expected header {_HEADER!r}, got {lines[0]!r}")
    if len(lines) < 2:
        raise MeshParseError(2, "missing counts line")
    parts = lines[1].split()
    if len(parts) != 2:
        raise MeshParseError(2, "counts line must hold two integers: nv nt")
    try:
        nv, nt = int(parts[0]), int(parts[1])
    except ValueError:
        raise MeshParseError(2, f"bad counts {lines[1]!r}") from None
    if len(lines) < 2 + nv + nt:
        raise MeshParseError(len(lines) + 1, f"expected {2 + nv + nt} lines, file has {len(lines)}")

    vertices = np.empty((nv, 2))
    for r in range(nv):
        lineno = 3 + r
        parts = lines[2 + r].split()
        if len(parts) != 2:
            raise MeshParseError(lineno, "vertex line must hold two coordinates")
        try:
            vertices[r] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshParseError(lineno, f"bad vertex line {lines[2 + r]!r}") from None
    if not np.all(np.isfinite(vertices)):
        raise MeshParseError(3, "non-finite vertex coordinate")

    triangles = np.empty((nt, 3), dtype=np.int64)
    region = np.empty(nt, dtype=np.int64)
    for r in range(nt):
        lineno = 3 + nv + r
        parts = lines[2 + nv + r].split()
        if len(parts) != 4:
            raise MeshParseError(lineno, "triangle line must hold: i j k tag")
        try:
            triangles[r] = [int(parts[0]), int(parts[1]), int(parts[2])]
        except ValueError:
            raise MeshParseError(lineno, f"bad vertex index in {lines[2 + nv + r]!r}") from None
        if parts[3] not in _TAG_VALUES:
            raise MeshParseError(lineno, f"unknown region tag {parts[3]!r}")
        region[r] = _TAG_VALUES[parts[3]]
        if triangles[r].min() < 0 or triangles[r].max() >= nv:
            raise MeshParseError(lineno, "vertex index out of range")

    halo_width = max(0.0, -float(vertices[:, 0].min())) if nv else 0.0
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        mesh_size=_max_edge_length(vertices, triangles),
        halo_width=halo_width,
    )
    validate_mesh(mesh)
    return mesh
