"""Variable-coefficient incompressible fluid on the fixed reference annulus.

The momentum operator carries the coefficient a a^T formed at quadrature
points from the exact pointwise inverse deformation gradient, which keeps
its Gram (ellipticity) structure intact; the constraint row uses the same
a, so the pressure blocks are exact transposes of each other.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels, mesh as meshmod
from .errors import MeshDegenerationError
from .kinematics import _min_eig_sym
from .spaces import basis_grads, basis_values


class FluidOperator:
    """Implicit-Euler step blocks on the full fluid spaces.

    A = M/dt + viscosity K(a a^T) acts on velocity; B is the weak
    divergence row tr(a Dv); the momentum equation carries -B^T on the
    pressure.  Interface coupling slots are left to the coupling module.
    """

    def __init__(self, M, K, B, dt, viscosity):
        self.M = M
        self.K = K
        self.B = B
        self.dt = dt
        self.viscosity = viscosity
        self.A = M / dt + viscosity * K


def viscous_matrix(space, aaT):
    """Vector stiffness with matrix coefficient a a^T (component-diagonal)."""
    elems = kernels.visc_elements(
        np.ascontiguousarray(aaT), np.ascontiguousarray(space.gradq), space.wdet
    )
    d = space.ncomp
    nloc = space.nloc
    elem = np.einsum("cab,ij->caibj", elems, np.eye(d)).reshape(
        len(space.cells), nloc * d, nloc * d
    )
    return space.scatter_matrix(elem)


def divergence_matrix(vspace, pspace, a):
    """Constraint rows: B[p, (a,i)] = int psi_p a_{ki} d_k phi_a."""
    valp = basis_values(vspace.dim, pspace.degree, vspace.qp)
    elems = kernels.div_elements(
        np.ascontiguousarray(a), np.ascontiguousarray(vspace.gradq), valp, vspace.wdet
    )
    nc, nlocp, nloca, d = elems.shape
    rows = np.repeat(pspace.cell_dofs[:, :, None], nloca * d, axis=2).ravel()
    cols = np.broadcast_to(
        vspace.cell_vdofs[:, None, :], (nc, nlocp, nloca * d)
    ).ravel()
    return sp.coo_matrix(
        (elems.reshape(nc, nlocp, nloca * d).ravel(), (rows, cols)),
        shape=(pspace.nscalar, vspace.ndof),
    ).tocsr()


def assemble_fluid_operator(kin, dt, viscosity, vspace, pspace, mass=None):
    """Blocks of the implicit-Euler fluid step at the current flow map."""
    margin = _min_eig_sym(kin.aaT).min()
    if margin <= 0:
        raise MeshDegenerationError(
            f"coefficient a a^T lost ellipticity (min eigenvalue {margin:.3e})"
        )
    M = vspace.mass_matrix() if mass is None else mass
    K = viscous_matrix(vspace, kin.aaT)
    B = divergence_matrix(vspace, pspace, kin.a)
    return FluidOperator(M, K, B, dt, viscosity)


def convective_term(kin, v, vspace, include=False):
    """Pulled-back convection functional; identically zero unless enabled.

    In the fixed-reference formulation the transport is absorbed by the
    flow map, so the default model carries no convective term; the enabled
    branch quadratures <(v . (a^T grad)) v, phi> for exploratory runs.
    """
    if not include:
        return np.zeros(vspace.ndof)
    vq = vspace.eval_qp(v)
    Dv = vspace.grad_qp(v)
    conv = np.einsum("cqj,cqkj,cqik->cqi", vq, kin.a, Dv)
    elem = np.einsum("cq,qa,cqi->cai", vspace.wdet, vspace.val, conv)
    return vspace.scatter_vector(elem)


def _outer_facet_tables(mesh, vspace, pspace):
    """Quadrature and trace data on the outer no-slip boundary."""
    from .quadrature import facet_rule

    d = mesh.dimension
    qp, qw = facet_rule(d, mesh.facet_quad_degree)
    out = []
    for fi in mesh.facet_indices(meshmod.OUTER):
        (cell, _), = mesh.facet_cells[fi]
        pts = mesh.vertices[mesh.facets[fi]]
        if d == 2:
            xq = pts[0] + qp * (pts[1] - pts[0])
            wq = qw * mesh.facet_measure[fi]
        else:
            xq = pts[0] + qp[:, :1] * (pts[1] - pts[0]) + qp[:, 1:2] * (pts[2] - pts[0])
            wq = qw * (mesh.facet_measure[fi] / 0.5)
        verts = mesh.vertices[mesh.cells[cell]]
        J = (verts[1:] - verts[0]).T
        Jinv = np.linalg.inv(J)
        ref = (xq - verts[0]) @ Jinv.T
        ci = int(np.flatnonzero(vspace.cells == cell)[0])
        pvals = basis_values(d, pspace.degree, ref)
        out.append((fi, ci, xq, wq, mesh.facet_normal[fi], pvals))
    return out


def solve_initial_pressure(problem, v0, w0, model):
    """Pressure at t = 0 from the elliptic problem driven by the initial
    velocity gradients, with the stress-matching Dirichlet datum on the
    interface and the weak normal-Laplacian datum on the outer boundary.
    """
    vspace, pspace, sspace = problem.vspace, problem.pspace, problem.sspace
    iface = problem.interface
    mesh = problem.mesh
    d = mesh.dimension

    # stiffness and volume load -grad v0 : grad v0 (transposed pairing)
    elems = np.einsum("cq,cqai,cqbi->cab", pspace.wdet, pspace.gradq, pspace.gradq)
    A = pspace.scatter_matrix(elems)
    Dv = vspace.grad_qp(v0)
    f = -np.einsum("cqik,cqki->cq", Dv, Dv)
    valp = basis_values(d, pspace.degree, vspace.qp)
    load = np.einsum("cq,qp,cq->cp", vspace.wdet, valp, f)
    b = np.zeros(pspace.nscalar)
    np.add.at(b, pspace.cell_dofs.ravel(), load.ravel())

    # outer boundary: weak Neumann datum  Dq . nu = (div D v0) . nu,
    # with the Laplacian taken cellwise (piecewise constant for P2)
    lap = vspace.hess_cells(v0)  # (nc, d, dd, dd)
    lap = np.einsum("ckii->ck", lap)
    for fi, ci, xq, wq, nu, pvals in problem.outer_tables:
        g = lap[ci] @ nu
        contrib = np.einsum("q,qp->p", wq * g, pvals)
        np.add.at(b, pspace.cell_dofs[ci], contrib)

    # interface Dirichlet datum: q0 = nu^T Dv0 nu - <traction(w0), nu>
    nv = len(mesh.vertices)
    pnodes = {}
    Dv_f = iface.fluid_grad_qp(v0)
    Dw_s = iface.solid_grad_qp(w0)
    for k in range(iface.nfac):
        nu = iface.normal[k]
        trac = model.traction(Dw_s[k], nu)
        gvals = np.einsum("qij,j,i->q", Dv_f[k], nu, nu) - trac @ nu
        # attribute facet-endpoint values to the P1 vertex nodes
        fverts = mesh.facets[iface.facets[k]]
        for v in fverts:
            dof = pspace.g2l[v]
            if dof < 0:
                continue
            # value at the vertex: evaluate the same expressions at the vertex
            x = mesh.vertices[v]
            # locate vertex among facet quadrature ends by projection weight
            pnodes.setdefault(dof, []).append(
                _vertex_datum(iface, k, x, nu, v0, w0, model)
            )
    dirich = {dof: float(np.mean(vals)) for dof, vals in pnodes.items()}

    fixed = np.array(sorted(dirich), dtype=np.int64)
    gvals = np.array([dirich[i] for i in fixed])
    free = np.setdiff1d(np.arange(pspace.nscalar), fixed)
    A = A.tocsc()
    rhs = b[free] - A[free][:, fixed] @ gvals
    qf = spla.spsolve(A[free][:, free], rhs)
    q0 = np.zeros(pspace.nscalar)
    q0[fixed] = gvals
    q0[free] = qf
    return q0


def _vertex_datum(iface, k, x, nu, v0, w0, model):
    """Interface Dirichlet value at a facet endpoint."""
    vspace, sspace = iface.fluid_space, iface.solid_space
    mesh = vspace.mesh

    def grad_at(space, cell_local, dofs_tab, u):
        cell = space.cells[cell_local]
        verts = mesh.vertices[mesh.cells[cell]]
        J = (verts[1:] - verts[0]).T
        Jinv = np.linalg.inv(J)
        ref = Jinv @ (x - verts[0])
        g = basis_grads(mesh.dimension, space.degree, ref[None, :])[0]
        gphys = g @ Jinv
        u_loc = space._as_nodal(u)[dofs_tab]
        return np.einsum("ai,ac->ci", gphys, u_loc)

    Dv = grad_at(vspace, iface.fluid_cell[k], iface.fluid_cell_dofs[k], v0)
    Dw = grad_at(sspace, iface.solid_cell[k], iface.solid_cell_dofs[k], w0)
    trac = model.traction(Dw, nu)
    return float(nu @ Dv @ nu - trac @ nu)


def pressure_schur_condition(problem, dt=1.0, viscosity=1.0):
    """Condition number of the pressure Schur complement at a = I
    (tracked as an inf-sup health indicator, not gated)."""
    from .kinematics import KinematicState

    kin = KinematicState.initial(problem.vspace, problem.interface)
    op = assemble_fluid_operator(kin, dt, viscosity, problem.vspace, problem.pspace,
                                 mass=problem.M_fluid)
    free = problem.free_fluid
    A = op.A[free][:, free].tocsc()
    B = op.B[:, free].tocsr()
    Ainv = spla.splu(A)
    S = np.array([B @ Ainv.solve(col) for col in B.toarray()])
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    w = w[np.abs(w) > 1e-12 * np.abs(w).max()]
    return float(w.max() / w.min())
