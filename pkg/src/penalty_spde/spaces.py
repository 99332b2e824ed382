"""Lagrange finite-element spaces (P1/P2, scalar or 2-vector) on triangles.

Vector spaces store dofs component-major: global dof = comp * n_scalar + s,
where s indexes the underlying scalar space.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConfigurationError
from .mesh import Mesh
from .quadrature import QuadRule, quadrature_rule

DEFAULT_QUAD_DEGREE = 5


def ref_basis(degree: int, pts: np.ndarray) -> np.ndarray:
    """Nodal basis values at reference points; shape (nq, nloc)."""
    x, y = pts[:, 0], pts[:, 1]
    l1, l2, l3 = 1.0 - x - y, x, y
    if degree == 1:
        return np.stack([l1, l2, l3], axis=1)
    if degree == 2:
        return np.stack(
            [
                l1 * (2 * l1 - 1),
                l2 * (2 * l2 - 1),
                l3 * (2 * l3 - 1),
                4 * l1 * l2,
                4 * l2 * l3,
                4 * l3 * l1,
            ],
            axis=1,
        )
    raise ConfigurationError(f"unsupported polynomial degree {degree}")


def ref_grad(degree: int, pts: np.ndarray) -> np.ndarray:
    """Reference gradients; shape (nq, nloc, 2)."""
    x, y = pts[:, 0], pts[:, 1]
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    if degree == 1:
        g = np.stack(
            [
                np.stack([-one, -one], axis=1),
                np.stack([one, zero], axis=1),
                np.stack([zero, one], axis=1),
            ],
            axis=1,
        )
        return g
    if degree == 2:
        l1 = 1.0 - x - y
        # dl1 = (-1,-1), dl2 = (1,0), dl3 = (0,1)
        g = np.empty((len(x), 6, 2))
        g[:, 0, 0] = -(4 * l1 - 1)
        g[:, 0, 1] = -(4 * l1 - 1)
        g[:, 1, 0] = 4 * x - 1
        g[:, 1, 1] = 0.0
        g[:, 2, 0] = 0.0
        g[:, 2, 1] = 4 * y - 1
        g[:, 3, 0] = 4 * (l1 - x)
        g[:, 3, 1] = -4 * x
        g[:, 4, 0] = 4 * y
        g[:, 4, 1] = 4 * x
        g[:, 5, 0] = -4 * y
        g[:, 5, 1] = 4 * (l1 - y)
        return g
    raise ConfigurationError(f"unsupported polynomial degree {degree}")


@dataclass(frozen=True)
class FunctionSpace:
    mesh: Mesh
    degree: int
    components: int
    n_scalar: int
    cell_dofs: np.ndarray  # (nt, nloc) scalar dof indices
    dof_coords: np.ndarray  # (n_scalar, 2)
    edge_of_pair: dict  # sorted vertex pair -> edge index (P2 only)

    @property
    def n_dofs(self):
        return self.components * self.n_scalar

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]

    def vector_dof(self, comp, scalar_idx):
        return comp * self.n_scalar + scalar_idx

    def geometry(self):
        """Jacobians of the affine maps: (detJ, invJ) with shapes (nt,), (nt, 2, 2)."""
        c = self.mesh.triangle_coords()
        J = np.empty((self.mesh.n_triangles, 2, 2))
        J[:, 0, 0] = c[:, 1, 0] - c[:, 0, 0]
        J[:, 0, 1] = c[:, 2, 0] - c[:, 0, 0]
        J[:, 1, 0] = c[:, 1, 1] - c[:, 0, 1]
        J[:, 1, 1] = c[:, 2, 1] - c[:, 0, 1]
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1] / det
        inv[:, 0, 1] = -J[:, 0, 1] / det
        inv[:, 1, 0] = -J[:, 1, 0] / det
        inv[:, 1, 1] = J[:, 0, 0] / det
        return det, inv

    def physical_points(self, ref_pts):
        """Map reference points into every triangle: (nt, nq, 2)."""
        c = self.mesh.triangle_coords()
        l1 = 1.0 - ref_pts[:, 0] - ref_pts[:, 1]
        bary = np.stack([l1, ref_pts[:, 0], ref_pts[:, 1]], axis=1)  # (nq, 3)
        return np.einsum("qv,tvd->tqd", bary, c)

    def tabulate(self, rule: QuadRule):
        """Basis values and physical gradients at quadrature points.

        Returns (phi, gphi, detJ) with shapes (nq, nloc), (nt, nq, nloc, 2), (nt,).
        """
        phi = ref_basis(self.degree, rule.points)
        gref = ref_grad(self.degree, rule.points)
        det, inv = self.geometry()
        # grad_x phi = invJ^T . grad_ref phi
        gphi = np.einsum("tdc,qld->tqlc", inv, gref)
        return phi, gphi, det


@dataclass
class FEFunction:
    """A finite-element field: a space plus one coefficient per dof."""

    space: FunctionSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ConfigurationError(
                f"coefficient length {self.coefficients.shape} does not match "
                f"space with {self.space.n_dofs} dofs"
            )

    def cell_values(self, phi):
        """Values at reference points inside every triangle: (nt, nq, comps)."""
        sp = self.space
        vals = np.empty((sp.mesh.n_triangles, phi.shape[0], sp.components))
        for c in range(sp.components):
            coef = self.coefficients[c * sp.n_scalar : (c + 1) * sp.n_scalar]
            vals[:, :, c] = coef[sp.cell_dofs] @ phi.T
        return vals

    def cell_gradients(self, gphi):
        """Gradients at reference points: (nt, nq, comps, 2)."""
        sp = self.space
        nt, nq = gphi.shape[0], gphi.shape[1]
        out = np.empty((nt, nq, sp.components, 2))
        for c in range(sp.components):
            coef = self.coefficients[c * sp.n_scalar : (c + 1) * sp.n_scalar]
            local = coef[sp.cell_dofs]  # (nt, nloc)
            out[:, :, c, :] = np.einsum("tl,tqlc->tqc", local, gphi)
        return out

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(
                f"pspde-fefunction 1 degree={self.space.degree} "
                f"components={self.space.components} n_dofs={self.space.n_dofs}\n"
            )
            for v in self.coefficients:
                fh.write(f"{float(v)!r}\n")

    @staticmethod
    def load(path, space):
        with open(path) as fh:
            header = fh.readline().split()
            if header[:2] != ["pspde-fefunction", "1"]:
                raise ConfigurationError("not a pspde-fefunction file")
            coeffs = np.array([float(ln) for ln in fh])
        return FEFunction(space, coeffs)


@dataclass(frozen=True)
class ConstraintSet:
    """Constrained dof indices (into the vector space) and prescribed values."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(np.unique(self.indices)) != len(self.indices):
            raise ConfigurationError("duplicate constrained dof indices")


def build_space(mesh: Mesh, degree: int, components: int) -> FunctionSpace:
    if degree not in (1, 2):
        raise ConfigurationError(f"unsupported polynomial degree {degree}")
    if components not in (1, 2):
        raise ConfigurationError(f"unsupported component count {components}")

    nv = mesh.n_vertices
    if degree == 1:
        cell_dofs = mesh.triangles.copy()
        coords = mesh.vertices.copy()
        edge_of_pair = {}
    else:
        edge_of_pair = {}
        for tri in mesh.triangles:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                if key not in edge_of_pair:
                    edge_of_pair[key] = len(edge_of_pair)
        ne = len(edge_of_pair)
        cell_dofs = np.empty((mesh.n_triangles, 6), dtype=np.int64)
        cell_dofs[:, :3] = mesh.triangles
        for t, tri in enumerate(mesh.triangles):
            for loc, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                cell_dofs[t, 3 + loc] = nv + edge_of_pair[key]
        coords = np.empty((nv + ne, 2))
        coords[:nv] = mesh.vertices
        for (va, vb), e in edge_of_pair.items():
            coords[nv + e] = 0.5 * (mesh.vertices[va] + mesh.vertices[vb])

    return FunctionSpace(
        mesh=mesh,
        degree=degree,
        components=components,
        n_scalar=coords.shape[0],
        cell_dofs=cell_dofs,
        dof_coords=coords,
        edge_of_pair=edge_of_pair,
    )


def _evaluate_target(space, target, rule):
    """Target values at the quadrature points of every triangle: (nt, nq, comps)."""
    if isinstance(target, FEFunction):
        phi = ref_basis(target.space.degree, rule.points)
        vals = target.cell_values(phi)
        if target.space.mesh is not space.mesh:
            raise ConfigurationError("FEFunction target must live on the same mesh")
        return vals
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]
    out = target(x, y)
    if space.components == 1:
        arr = np.asarray(out, dtype=float)
        if arr.shape != x.shape:
            arr = np.broadcast_to(arr, x.shape)
        return arr[..., None]
    vals = np.empty(x.shape + (2,))
    for c in range(2):
        comp = np.asarray(out[c], dtype=float)
        vals[..., c] = np.broadcast_to(comp, x.shape)
    return vals


def mass_matrix_scalar(space, rule=None):
    """Scalar-subspace mass matrix in CSR form (helper for assembly/projection)."""
    import scipy.sparse as sp

    rule = rule or quadrature_rule(min(2 * space.degree, 5))
    phi, _, det = space.tabulate(rule)
    base = np.einsum("q,qa,qb->ab", rule.weights, phi, phi)
    local = det[:, None, None] * base[None, :, :]
    rows = np.repeat(space.cell_dofs, space.n_local, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, space.n_local)).ravel()
    M = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.n_scalar, space.n_scalar)
    ).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def l2_project(space: FunctionSpace, target) -> FEFunction:
    """L2-orthogonal projection of a pointwise-evaluable target onto the space."""
    rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
    phi, _, det = space.tabulate(rule)
    vals = _evaluate_target(space, target, rule)

    Ms = mass_matrix_scalar(space)
    solve = spla.factorized(Ms.tocsc())

    coeffs = np.empty(space.n_dofs)
    wphi = rule.weights[:, None] * phi  # (nq, nloc)
    for c in range(space.components):
        # b_a = sum_t detJ_t sum_q w_q f(x_tq) phi_a(q)
        local_b = np.einsum("t,tq,qa->ta", det, vals[:, :, c], wphi)
        b = np.zeros(space.n_scalar)
        np.add.at(b, space.cell_dofs, local_b)
        sol = solve(b)
        resid = np.linalg.norm(Ms @ sol - b)
        if resid > 1e-12 * max(np.linalg.norm(b), 1.0):
            raise ConfigurationError("mass solve in l2_project did not converge")
        coeffs[c * space.n_scalar : (c + 1) * space.n_scalar] = sol
    return FEFunction(space, coeffs)


def dirichlet_constraints(space: FunctionSpace, boundary_values: dict) -> ConstraintSet:
    """Constrain all dofs on boundary edges whose tag appears in the map.

    `boundary_values` maps tag -> callable (x, y) -> value tuple (length =
    components). A `"default"` entry applies to every boundary tag not
    listed. When a dof is shared by edges with different tags, the largest
    tag wins.
    """
    mesh = space.mesh
    present = set(int(t) for t in mesh.boundary_edges[:, 2])
    default = boundary_values.get("default")
    for tag in boundary_values:
        if tag == "default":
            continue
        if int(tag) not in present:
            raise ConfigurationError(f"boundary tag {tag} not present in mesh")

    tag_funcs = {int(t): f for t, f in boundary_values.items() if t != "default"}
    if default is not None:
        for t in present:
            tag_funcs.setdefault(t, default)

    nv = mesh.n_vertices
    chosen = {}  # scalar dof -> winning tag
    for v0, v1, tag in mesh.boundary_edges:
        tag = int(tag)
        if tag not in tag_funcs:
            continue
        dofs = [int(v0), int(v1)]
        if space.degree == 2:
            key = (min(v0, v1), max(v0, v1))
            dofs.append(nv + space.edge_of_pair[key])
        for d in dofs:
            if d not in chosen or tag > chosen[d]:
                chosen[d] = tag

    indices = []
    values = []
    for d in sorted(chosen):
        func = tag_funcs[chosen[d]]
        x, y = space.dof_coords[d]
        val = func(x, y)
        if space.components == 1:
            indices.append(d)
            values.append(float(val))
        else:
            for c in range(space.components):
                indices.append(space.vector_dof(c, d))
                values.append(float(val[c]))
    return ConstraintSet(np.array(indices, dtype=np.int64), np.array(values))


__all__ = [
    "FunctionSpace",
    "FEFunction",
    "ConstraintSet",
    "QuadRule",
    "quadrature_rule",
    "build_space",
    "l2_project",
    "dirichlet_constraints",
    "ref_basis",
    "ref_grad",
    "DEFAULT_QUAD_DEGREE",
]
