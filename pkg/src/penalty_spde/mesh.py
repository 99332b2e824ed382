"""Triangle meshes of polygonal domains with tagged boundary edges.

Boundary tag registry (used by the structured generators):

    1   left side        (x = xmin, or x = 0 on the L-shape above the inflow)
    2   right side       (x = xmax)
    3   bottom side      (y = ymin)
    4   top side         (y = ymax)
    5   reentrant vertical segment of the L-shape  (x = side/2, y > side/2)
    6   reentrant horizontal segment of the L-shape (y = side/2, x > side/2)
    10  inflow segment {0} x [0, 1] of the L-shape (only when side >= 1)

Config files reference these integers, never coordinates.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidGeometryError, MeshParseError

_GEOM_TOL = 1e-12

TAG_LEFT, TAG_RIGHT, TAG_BOTTOM, TAG_TOP = 1, 2, 3, 4
TAG_REENTRANT_V, TAG_REENTRANT_H = 5, 6
TAG_INFLOW = 10


@dataclass(frozen=True)
class Mesh:
    """Immutable conforming triangulation.

    vertices: (nv, 2) coordinates
    triangles: (nt, 3) vertex indices, counterclockwise
    boundary_edges: (nb, 3) rows (v0, v1, tag)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    h_max: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(
            self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64)
        )
        if self.h_max == 0.0:
            object.__setattr__(self, "h_max", float(np.max(self.edge_lengths())))
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        self.boundary_edges.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_coords(self):
        """(nt, 3, 2) coordinates of triangle corners."""
        return self.vertices[self.triangles]

    def signed_areas(self):
        c = self.triangle_coords()
        return 0.5 * (
            (c[:, 1, 0] - c[:, 0, 0]) * (c[:, 2, 1] - c[:, 0, 1])
            - (c[:, 2, 0] - c[:, 0, 0]) * (c[:, 1, 1] - c[:, 0, 1])
        )

    def edge_lengths(self):
        """(nt, 3) lengths of the three edges of each triangle."""
        c = self.triangle_coords()
        out = np.empty((self.n_triangles, 3))
        for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            out[:, e] = np.linalg.norm(c[:, b] - c[:, a], axis=1)
        return out

    def edge_map(self):
        """Map sorted vertex pair -> list of adjacent triangle indices."""
        edges = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                edges.setdefault(key, []).append(t)
        return edges

    def validate(self):
        areas = self.signed_areas()
        if np.any(areas <= 0):
            raise InvalidGeometryError("mesh contains non-counterclockwise triangles")
        emap = self.edge_map()
        boundary = {
            (min(v0, v1), max(v0, v1)) for v0, v1, _ in self.boundary_edges
        }
        for key, tris in emap.items():
            if len(tris) == 1 and key not in boundary:
                raise InvalidGeometryError(f"untagged boundary edge {key}")
            if len(tris) > 2:
                raise InvalidGeometryError(f"edge {key} shared by {len(tris)} triangles")
        for key in boundary:
            if len(emap.get(key, ())) != 1:
                raise InvalidGeometryError(f"tagged edge {key} is not a boundary edge")
        return self


def _orient_ccw(vertices, triangles):
    tris = np.array(triangles, dtype=np.int64)
    c = vertices[tris]
    areas = 0.5 * (
        (c[:, 1, 0] - c[:, 0, 0]) * (c[:, 2, 1] - c[:, 0, 1])
        - (c[:, 2, 0] - c[:, 0, 0]) * (c[:, 1, 1] - c[:, 0, 1])
    )
    if np.any(np.abs(areas) <= _GEOM_TOL):
        raise InvalidGeometryError("degenerate (zero-area) triangle")
    flip = areas < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def generate_rect_mesh(nx: int, ny: int, bounds=(0.0, 0.0, 1.0, 1.0)) -> Mesh:
    """Structured mesh of an axis-aligned rectangle.

    Each cell is split along its bottom-left to top-right diagonal.
    Sides carry tags left=1, right=2, bottom=3, top=4.
    """
    if nx < 1 or ny < 1:
        raise ConfigurationError("nx and ny must be >= 1")
    x0, y0, x1, y1 = map(float, bounds)
    if x1 - x0 <= _GEOM_TOL or y1 - y0 <= _GEOM_TOL:
        raise InvalidGeometryError("rectangle has zero width or height")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i
    verts = np.array([(xs[i], ys[j]) for j in range(ny + 1) for i in range(nx + 1)])

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))

    bedges = []
    for j in range(ny):
        bedges.append((vid(0, j), vid(0, j + 1), TAG_LEFT))
        bedges.append((vid(nx, j), vid(nx, j + 1), TAG_RIGHT))
    for i in range(nx):
        bedges.append((vid(i, 0), vid(i + 1, 0), TAG_BOTTOM))
        bedges.append((vid(i, ny), vid(i + 1, ny), TAG_TOP))

    return Mesh(verts, np.array(tris), np.array(bedges)).validate()


def generate_l_shape(side: float, n: int) -> Mesh:
    """Mesh of [0, side]^2 minus the open upper-right quadrant.

    n is the number of cells per full side and must be even so the
    reentrant corner falls on a grid line. The segment {0} x [0, 1] is
    tagged as inflow (tag 10) when side >= 1.
    """
    if side <= 0:
        raise InvalidGeometryError("side must be positive")
    if n < 2 or n % 2 != 0:
        raise ConfigurationError("n must be even and >= 2 for the L-shape")

    half = side / 2.0
    hcell = side / n
    xs = np.linspace(0.0, side, n + 1)

    keep = {}
    verts = []

    def vid(i, j):
        key = (i, j)
        if key not in keep:
            keep[key] = len(verts)
            verts.append((xs[i], xs[j]))
        return keep[key]

    tris = []
    for j in range(n):
        for i in range(n):
            cx = (xs[i] + xs[i + 1]) / 2.0
            cy = (xs[j] + xs[j + 1]) / 2.0
            if cx > half and cy > half:
                continue
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))

    verts = np.asarray(verts)
    tris = np.asarray(tris, dtype=np.int64)

    # Boundary edges recovered from connectivity, then tagged by geometry.
    mesh0 = Mesh(verts, tris, np.zeros((0, 3), dtype=np.int64))
    emap = mesh0.edge_map()
    bedges = []
    for (v0, v1), owners in sorted(emap.items()):
        if len(owners) != 1:
            continue
        p0, p1 = verts[v0], verts[v1]
        mid = 0.5 * (p0 + p1)
        if abs(mid[0]) <= _GEOM_TOL:
            inflow = side >= 1.0 and max(p0[1], p1[1]) <= 1.0 + _GEOM_TOL
            tag = TAG_INFLOW if inflow else TAG_LEFT
        elif abs(mid[0] - side) <= _GEOM_TOL:
            tag = TAG_RIGHT
        elif abs(mid[1]) <= _GEOM_TOL:
            tag = TAG_BOTTOM
        elif abs(mid[1] - side) <= _GEOM_TOL:
            tag = TAG_TOP
        elif abs(mid[0] - half) <= _GEOM_TOL and mid[1] > half:
            tag = TAG_REENTRANT_V
        elif abs(mid[1] - half) <= _GEOM_TOL and mid[0] > half:
            tag = TAG_REENTRANT_H
        else:
            raise InvalidGeometryError(f"boundary edge off the L-shape outline: {mid}")
        bedges.append((v0, v1, tag))

    return Mesh(verts, tris, np.asarray(bedges, dtype=np.int64), h_max=hcell * np.sqrt(2.0)).validate()


def mesh_stats(mesh: Mesh) -> dict:
    """h_max, h_min and the quasi-uniformity ratio h_max / h_min."""
    diam = mesh.edge_lengths().max(axis=1)
    h_max = float(diam.max())
    h_min = float(diam.min())
    return {
        "h_max": h_max,
        "h_min": h_min,
        "quasi_uniformity_ratio": h_max / h_min,
    }


def load_msh(path) -> Mesh:
    """Read an ASCII Gmsh MSH 2.2 file (lines and triangles only)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]

    def section(name):
        try:
            start = lines.index(f"${name}")
            end = lines.index(f"$End{name}")
        except ValueError:
            raise MeshParseError(f"missing ${name} section") from None
        return lines[start + 1 : end]

    fmt = section("MeshFormat")
    if not fmt or not fmt[0].startswith("2.2"):
        raise MeshParseError("only ASCII MSH version 2.2 is supported")

    node_lines = section("Nodes")
    n_nodes = int(node_lines[0])
    ids = {}
    verts = np.empty((n_nodes, 2))
    for row, ln in enumerate(node_lines[1 : 1 + n_nodes]):
        parts = ln.split()
        nid = int(parts[0])
        x, y, z = float(parts[1]), float(parts[2]), float(parts[3])
        if abs(z) > 1e-12:
            raise InvalidGeometryError(f"node {nid} has nonzero z coordinate {z}")
        ids[nid] = row
        verts[row] = (x, y)

    elem_lines = section("Elements")
    n_elem = int(elem_lines[0])
    tris = []
    bedges = []
    for ln in elem_lines[1 : 1 + n_elem]:
        parts = [int(p) for p in ln.split()]
        etype = parts[1]
        ntags = parts[2]
        tags = parts[3 : 3 + ntags]
        conn = parts[3 + ntags :]
        phys = tags[0] if tags else 0
        if etype == 1:
            bedges.append((ids[conn[0]], ids[conn[1]], phys))
        elif etype == 2:
            tris.append(tuple(ids[c] for c in conn))
        elif etype == 15:
            continue  # isolated point elements carry no geometry here
        else:
            raise MeshParseError(f"unsupported element type {etype}")

    tris = _orient_ccw(verts, tris)
    return Mesh(verts, tris, np.asarray(bedges, dtype=np.int64).reshape(-1, 3)).validate()


def save_mesh(mesh: Mesh, path):
    """Native line-oriented ASCII dump; inverse of load_mesh."""
    with open(path, "w") as fh:
        fh.write("pspde-mesh 1\n")
        fh.write(f"{mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"{mesh.n_triangles}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        fh.write(f"{len(mesh.boundary_edges)}\n")
        for i, j, tag in mesh.boundary_edges:
            fh.write(f"{i} {j} {tag}\n")


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if header[:1] != ["pspde-mesh"]:
            raise MeshParseError("not a pspde-mesh file")
        nv = int(fh.readline())
        verts = np.array([[float(v) for v in fh.readline().split()] for _ in range(nv)])
        nt = int(fh.readline())
        tris = np.array(
            [[int(v) for v in fh.readline().split()] for _ in range(nt)], dtype=np.int64
        )
        nb = int(fh.readline())
        bedges = np.array(
            [[int(v) for v in fh.readline().split()] for _ in range(nb)], dtype=np.int64
        ).reshape(-1, 3)
    return Mesh(verts, tris, bedges).validate()
