"""Assembly of the discrete operators used by the time-stepping schemes.

All matrices are scipy CSR. The convection matrix implements the
skew-symmetrized trilinear form

    bhat(u, v, w) = ([u . grad] v, w) + 1/2 ([div u] v, w)

whose discrete skew-symmetry bhat(u, v, v) = 0 (for v with zero boundary
trace) holds to round-off because the default quadrature integrates the
degree-5 integrand exactly for P2 velocity.
"""

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .quadrature import quadrature_rule
from .spaces import DEFAULT_QUAD_DEGREE, FEFunction, FunctionSpace, mass_matrix_scalar, ref_basis


def _scatter(local, rows_dofs, cols_dofs, shape):
    nla = rows_dofs.shape[1]
    nlb = cols_dofs.shape[1]
    rows = np.repeat(rows_dofs, nlb, axis=1).ravel()
    cols = np.tile(cols_dofs, (1, nla)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _expand_vector(space, A_scalar):
    if space.components == 1:
        return A_scalar
    return sp.block_diag([A_scalar] * space.components, format="csr")


def mass_matrix(space: FunctionSpace) -> sp.csr_matrix:
    """L2 inner-product matrix (block diagonal over components)."""
    return _expand_vector(space, mass_matrix_scalar(space))


def stiffness_matrix(space: FunctionSpace) -> sp.csr_matrix:
    """Gradient inner-product matrix; viscosity is applied by the caller."""
    rule = quadrature_rule(min(2 * (space.degree - 1) + 2, DEFAULT_QUAD_DEGREE))
    _, gphi, det = space.tabulate(rule)
    local = np.einsum("q,tqad,tqbd,t->tab", rule.weights, gphi, gphi, det)
    K = _scatter(local, space.cell_dofs, space.cell_dofs, (space.n_scalar, space.n_scalar))
    # symmetrize away last-bit asymmetry from the einsum reduction order
    K = ((K + K.T) * 0.5).tocsr()
    K.sort_indices()
    return _expand_vector(space, K)


def divergence_matrix(vel_space: FunctionSpace, pres_space: FunctionSpace) -> sp.csr_matrix:
    """B with B[q, phi] = (div phi, q); shape n_pres x n_vel."""
    if vel_space.mesh is not pres_space.mesh:
        raise ConfigurationError("velocity and pressure spaces use different meshes")
    if vel_space.components != 2:
        raise ConfigurationError("velocity space must be 2-vector valued")
    rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
    pphi = ref_basis(pres_space.degree, rule.points)
    _, gphi, det = vel_space.tabulate(rule)

    blocks = []
    for c in range(2):
        local = np.einsum("q,qp,tqa,t->tpa", rule.weights, pphi, gphi[:, :, :, c], det)
        blocks.append(
            _scatter(
                local,
                pres_space.cell_dofs,
                vel_space.cell_dofs,
                (pres_space.n_scalar, vel_space.n_scalar),
            )
        )
    return sp.hstack(blocks, format="csr")


def convection_matrix(vel_space: FunctionSpace, wind: FEFunction,
                      tab=None) -> sp.csr_matrix:
    """N(w)[i, j] = bhat(w, phi_j, phi_i) on the vector velocity space.

    `tab` optionally carries a precomputed (rule, phi, gphi, det) tuple so
    time loops do not re-tabulate the basis every step.
    """
    if wind.space is not vel_space:
        raise ConfigurationError("wind must belong to the velocity space")
    if tab is None:
        rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
        phi, gphi, det = vel_space.tabulate(rule)
    else:
        rule, phi, gphi, det = tab
    wvals = wind.cell_values(phi)  # (nt, nq, 2)
    wgrad = wind.cell_gradients(gphi)  # (nt, nq, 2, 2)
    wdiv = wgrad[:, :, 0, 0] + wgrad[:, :, 1, 1]

    # scalar block: integral (w . grad psi_b) psi_a + 1/2 (div w) psi_b psi_a
    adv = np.einsum("q,tqd,tqbd,qa,t->tab", rule.weights, wvals, gphi, phi, det)
    stab = 0.5 * np.einsum("q,tq,qb,qa,t->tab", rule.weights, wdiv, phi, phi, det)
    Ns = _scatter(
        adv + stab,
        vel_space.cell_dofs,
        vel_space.cell_dofs,
        (vel_space.n_scalar, vel_space.n_scalar),
    )
    return _expand_vector(vel_space, Ns)


def trilinear_eval(u: FEFunction, v: FEFunction, w: FEFunction,
                   tab=None) -> float:
    """Direct quadrature evaluation of bhat(u, v, w)."""
    space = u.space
    if v.space is not space or w.space is not space:
        raise ConfigurationError("all three fields must share the velocity space")
    if tab is None:
        rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
        phi, gphi, det = space.tabulate(rule)
    else:
        rule, phi, gphi, det = tab
    uvals = u.cell_values(phi)
    vgrad = v.cell_gradients(gphi)
    vvals = v.cell_values(phi)
    wvals = w.cell_values(phi)
    ugrad = u.cell_gradients(gphi)
    udiv = ugrad[:, :, 0, 0] + ugrad[:, :, 1, 1]

    conv = np.einsum("tqd,tqcd,tqc->tq", uvals, vgrad, wvals)
    stab = 0.5 * udiv * np.einsum("tqc,tqc->tq", vvals, wvals)
    return float(np.einsum("q,tq,t->", rule.weights, conv + stab, det))


def load_vector(space: FunctionSpace, f, t_start: float, t_end: float) -> np.ndarray:
    """Entries (f_avg, phi_i) where f_avg is the 2-point Gauss time average of f.

    f has signature f(t, x, y) -> (fx, fy) with array-valued x, y.
    """
    rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
    phi, _, det = space.tabulate(rule)
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]

    mid = 0.5 * (t_start + t_end)
    half = 0.5 * (t_end - t_start)
    gauss = mid + half * np.array([-1.0, 1.0]) / np.sqrt(3.0)

    vals = np.zeros(x.shape + (space.components,))
    for t in gauss:
        out = f(t, x, y)
        if space.components == 1:
            vals[..., 0] += 0.5 * np.broadcast_to(np.asarray(out, dtype=float), x.shape)
        else:
            for c in range(space.components):
                vals[..., c] += 0.5 * np.broadcast_to(np.asarray(out[c], dtype=float), x.shape)

    b = np.zeros(space.n_dofs)
    wphi = rule.weights[:, None] * phi
    for c in range(space.components):
        local = np.einsum("t,tq,qa->ta", det, vals[:, :, c], wphi)
        np.add.at(b, c * space.n_scalar + space.cell_dofs, local)
    return b


def export_matrix_market(matrix, path):
    """Debug export of any assembled operator."""
    from scipy.io import mmwrite

    mmwrite(str(path), matrix)
