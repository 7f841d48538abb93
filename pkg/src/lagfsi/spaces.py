"""Scalar/vector Lagrange spaces (P1, P2) on a region of the reference mesh.

Global P2 nodes are mesh vertices followed by edge midpoints; each space
keeps its own compact scalar-dof numbering over the nodes its cells touch.
Vector dofs interleave components node-major: dof = scalar_dof * ncomp + comp.
"""

import numpy as np
import scipy.sparse as sp

from . import mesh as meshmod
from .quadrature import facet_rule, simplex_rule


def _bary(dim, pts):
    pts = np.asarray(pts, dtype=float)
    lam0 = 1.0 - pts.sum(axis=1)
    return np.column_stack([lam0, pts])


def _grad_bary(dim):
    g = np.zeros((dim + 1, dim))
    g[0] = -1.0
    g[1:] = np.eye(dim)
    return g


def _local_edges(dim):
    if dim == 2:
        return [(0, 1), (0, 2), (1, 2)]
    return [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def basis_values(dim, degree, pts):
    """Reference basis values, shape (npts, nloc)."""
    lam = _bary(dim, pts)
    if degree == 1:
        return lam
    vals = [lam[:, i] * (2 * lam[:, i] - 1) for i in range(dim + 1)]
    vals += [4 * lam[:, a] * lam[:, b] for a, b in _local_edges(dim)]
    return np.column_stack(vals)


def basis_grads(dim, degree, pts):
    """Reference basis gradients, shape (npts, nloc, dim)."""
    lam = _bary(dim, pts)
    g = _grad_bary(dim)
    npts = lam.shape[0]
    if degree == 1:
        return np.broadcast_to(g, (npts, dim + 1, dim)).copy()
    out = np.zeros((npts, 2 * (dim + 1) if dim == 2 else 10, dim))
    if dim == 3:
        out = np.zeros((npts, 10, dim))
    for i in range(dim + 1):
        out[:, i] = (4 * lam[:, i] - 1)[:, None] * g[i]
    for k, (a, b) in enumerate(_local_edges(dim)):
        out[:, dim + 1 + k] = 4 * (lam[:, b][:, None] * g[a] + lam[:, a][:, None] * g[b])
    return out


def basis_hessians(dim, degree):
    """Constant reference Hessians of the basis, shape (nloc, dim, dim)."""
    g = _grad_bary(dim)
    if degree == 1:
        return np.zeros((dim + 1, dim, dim))
    nloc = (dim + 1) + len(_local_edges(dim))
    H = np.zeros((nloc, dim, dim))
    for i in range(dim + 1):
        H[i] = 4 * np.outer(g[i], g[i])
    for k, (a, b) in enumerate(_local_edges(dim)):
        H[dim + 1 + k] = 4 * (np.outer(g[a], g[b]) + np.outer(g[b], g[a]))
    return H


class FieldSpace:
    """Lagrange space on the cells of one region.

    Parameters
    ----------
    mesh : ReferenceMesh
    region : int
        mesh.FLUID or mesh.SOLID.
    kind : str
        Label only ('fluid-velocity', 'fluid-pressure', 'solid-displacement').
    degree : int, 1 or 2
    ncomp : int
        1 for scalar fields, mesh.dimension for vector fields.
    quad_degree : int
        Cell quadrature exactness (default 2*degree + 1).
    """

    def __init__(self, mesh, region, kind, degree, ncomp, quad_degree=None):
        self.mesh = mesh
        self.region = region
        self.kind = kind
        self.degree = degree
        self.ncomp = ncomp
        d = mesh.dimension
        self.dim = d
        if quad_degree is None:
            quad_degree = 2 * degree + 1
        self.quad_degree = quad_degree

        self.cells = np.flatnonzero(mesh.region == region)
        nv = len(mesh.vertices)
        if degree == 1:
            cell_nodes = mesh.cells[self.cells]
        else:
            cell_nodes = np.hstack(
                [mesh.cells[self.cells], nv + mesh.cell_edges[self.cells]]
            )
        self.cell_nodes = cell_nodes
        nodes = np.unique(cell_nodes)
        self.nodes = nodes
        self.nscalar = len(nodes)
        self.ndof = self.nscalar * ncomp
        n_glob = nv + (len(mesh.edges) if degree == 2 else 0)
        g2l = np.full(n_glob, -1, dtype=np.int64)
        g2l[nodes] = np.arange(self.nscalar)
        self.g2l = g2l
        self.cell_dofs = g2l[cell_nodes]  # (ncr, nloc) scalar dofs

        coords = np.empty((self.nscalar, d))
        vert_mask = nodes < nv
        coords[vert_mask] = mesh.vertices[nodes[vert_mask]]
        if degree == 2:
            em = ~vert_mask
            epairs = mesh.edges[nodes[em] - nv]
            coords[em] = 0.5 * (mesh.vertices[epairs[:, 0]] + mesh.vertices[epairs[:, 1]])
        self.node_coords = coords

        self._build_tables()

    def _build_tables(self):
        d = self.dim
        qp, qw = simplex_rule(d, self.quad_degree)
        self.qp, self.qw = qp, qw
        self.nq = len(qw)
        self.val = basis_values(d, self.degree, qp)           # (nq, nloc)
        gref = basis_grads(d, self.degree, qp)                # (nq, nloc, d)
        verts = self.mesh.vertices[self.mesh.cells[self.cells]]
        J = np.transpose(verts[:, 1:] - verts[:, :1], (0, 2, 1))  # (ncr, d, d)
        detJ = np.abs(np.linalg.det(J))
        Jinv = np.linalg.inv(J)
        self.detJ = detJ
        self.Jinv = Jinv
        # physical gradients: grad phi = Jinv^T grad_ref phi
        self.gradq = np.einsum("cji,qaj->cqai", Jinv, gref)
        self.wdet = qw[None, :] * detJ[:, None]               # (ncr, nq)
        self.xq = verts[:, 0][:, None, :] + np.einsum("qj,cij->cqi", qp, J)
        Href = basis_hessians(d, self.degree)                 # (nloc, d, d)
        self.hessq = np.einsum("cki,akl,clj->caij", Jinv, Href, Jinv)
        self.nloc = self.val.shape[1]
        comp = np.arange(self.ncomp)
        self.cell_vdofs = (
            self.cell_dofs[:, :, None] * self.ncomp + comp[None, None, :]
        ).reshape(len(self.cells), self.nloc * self.ncomp)

    # -- field operations ------------------------------------------------------

    def zeros(self):
        return np.zeros(self.ndof)

    def interpolate(self, fn):
        """Nodal interpolation of a callable fn(x) -> scalar or (ncomp,)."""
        out = np.zeros((self.nscalar, self.ncomp))
        for i, x in enumerate(self.node_coords):
            out[i] = fn(x)
        return out.reshape(-1)

    def _as_nodal(self, dofs):
        return np.asarray(dofs).reshape(self.nscalar, self.ncomp)

    def eval_qp(self, dofs):
        u = self._as_nodal(dofs)[self.cell_dofs]              # (ncr, nloc, ncomp)
        return np.einsum("qa,cak->cqk", self.val, u)

    def grad_qp(self, dofs):
        u = self._as_nodal(dofs)[self.cell_dofs]
        return np.einsum("cqai,cak->cqki", self.gradq, u)

    def hess_cells(self, dofs):
        """Second derivatives, constant per cell: (ncr, ncomp, d, d)."""
        u = self._as_nodal(dofs)[self.cell_dofs]
        return np.einsum("caij,cak->ckij", self.hessq, u)

    def integrate(self, values_qp):
        """Integrate scalar values sampled at quadrature points."""
        return float(np.sum(self.wdet * values_qp))

    def l2_norm_sq(self, dofs):
        vals = self.eval_qp(dofs)
        return self.integrate(np.einsum("cqk,cqk->cq", vals, vals))

    def grad_norm_sq(self, dofs):
        g = self.grad_qp(dofs)
        return self.integrate(np.einsum("cqki,cqki->cq", g, g))

    def broken_sobolev_sq(self, dofs, order):
        """Broken squared Sobolev norm truncated at representable derivatives."""
        total = self.l2_norm_sq(dofs)
        if order >= 1:
            total += self.grad_norm_sq(dofs)
        if order >= 2 and self.degree >= 2:
            H = self.hess_cells(dofs)
            vols = self.wdet.sum(axis=1)
            total += float(np.sum(vols * np.einsum("ckij,ckij->c", H, H)))
        return total

    # -- assembly helpers ------------------------------------------------------

    def scatter_matrix(self, elem, ncomp_row=None):
        """Assemble element matrices (ncr, nloc*ncomp, nloc*ncomp) into CSR."""
        vd = self.cell_vdofs
        rows = np.repeat(vd, vd.shape[1], axis=1).ravel()
        cols = np.tile(vd, (1, vd.shape[1])).ravel()
        return sp.coo_matrix(
            (elem.ravel(), (rows, cols)), shape=(self.ndof, self.ndof)
        ).tocsr()

    def scatter_vector(self, elem):
        """Assemble element vectors (ncr, nloc*ncomp) into a global vector."""
        out = np.zeros(self.ndof)
        np.add.at(out, self.cell_vdofs.ravel(), elem.ravel())
        return out

    def mass_matrix(self):
        m = np.einsum("cq,qa,qb->cab", self.wdet, self.val, self.val)
        if self.ncomp == 1:
            return self.scatter_matrix(m)
        nloc, nc = self.nloc, self.ncomp
        elem = np.einsum("cab,ij->caibj", m, np.eye(nc)).reshape(
            len(self.cells), nloc * nc, nloc * nc
        )
        return self.scatter_matrix(elem)

    def boundary_scalar_dofs(self, facet_tag):
        """Scalar dofs of all nodes lying on facets with the given tag."""
        mesh = self.mesh
        nv = len(mesh.vertices)
        nodes = set()
        edge_id = {tuple(e): i for i, e in enumerate(map(tuple, mesh.edges))}
        for fi in mesh.facet_indices(facet_tag):
            fverts = mesh.facets[fi]
            nodes.update(int(v) for v in fverts)
            if self.degree == 2:
                for a in range(len(fverts)):
                    for b in range(a + 1, len(fverts)):
                        key = (min(fverts[a], fverts[b]), max(fverts[a], fverts[b]))
                        nodes.add(nv + edge_id[key])
        dofs = [self.g2l[n] for n in sorted(nodes) if self.g2l[n] >= 0]
        return np.array(dofs, dtype=np.int64)

    def free_mask(self, dirichlet_tag):
        """Boolean mask of unconstrained vector dofs."""
        mask = np.ones(self.ndof, dtype=bool)
        fixed = self.boundary_scalar_dofs(dirichlet_tag)
        for c in range(self.ncomp):
            mask[fixed * self.ncomp + c] = False
        return mask


class InterfaceData:
    """Quadrature and trace structures on the solid/fluid interface.

    The fluid-velocity and solid-displacement traces share the interface
    nodes, so interface integrals are single-surface sums and the trace
    space is the interface restriction of either volume space.
    """

    def __init__(self, mesh, fluid_space, solid_space, pressure_space=None):
        self.mesh = mesh
        d = mesh.dimension
        self.dim = d
        self.fluid_space = fluid_space
        self.solid_space = solid_space
        self.pressure_space = pressure_space
        self.ncomp = fluid_space.ncomp
        self.facets = mesh.facet_indices(meshmod.INTERFACE)
        nfac = len(self.facets)
        self.nfac = nfac
        nv = len(mesh.vertices)

        degree = fluid_space.degree
        assert degree == solid_space.degree == 2
        edge_id = {tuple(e): i for i, e in enumerate(map(tuple, mesh.edges))}

        # facet-local node lists (global node ids): vertices then edge midpoints
        facet_nodes = []
        for fi in self.facets:
            fverts = [int(v) for v in mesh.facets[fi]]
            nodes = list(fverts)
            if d == 2:
                pairs = [(0, 1)]
            else:
                pairs = [(0, 1), (0, 2), (1, 2)]
            for a, b in pairs:
                key = (min(fverts[a], fverts[b]), max(fverts[a], fverts[b]))
                nodes.append(nv + edge_id[key])
            facet_nodes.append(nodes)
        facet_nodes = np.array(facet_nodes, dtype=np.int64)
        self.facet_nodes = facet_nodes
        self.nlocf = facet_nodes.shape[1]

        self.trace_nodes = np.unique(facet_nodes)
        self.ntr = len(self.trace_nodes)
        self.nlam = self.ntr * self.ncomp
        g2t = {}
        for i, n in enumerate(self.trace_nodes):
            g2t[int(n)] = i
        self.facet_trace = np.array(
            [[g2t[int(n)] for n in row] for row in facet_nodes], dtype=np.int64
        )
        self.trace_to_fluid = fluid_space.g2l[self.trace_nodes]
        self.trace_to_solid = solid_space.g2l[self.trace_nodes]
        assert np.all(self.trace_to_fluid >= 0) and np.all(self.trace_to_solid >= 0)

        self._build_quadrature()
        self._build_side_tables()
        self._build_mass()

    def _build_quadrature(self):
        mesh = self.mesh
        d = self.dim
        qp, qw = facet_rule(d, mesh.facet_quad_degree)
        self.nqf = len(qw)
        xq = np.zeros((self.nfac, self.nqf, d))
        wq = np.zeros((self.nfac, self.nqf))
        normals = np.zeros((self.nfac, d))
        for k, fi in enumerate(self.facets):
            pts = mesh.vertices[mesh.facets[fi]]
            if d == 2:
                xq[k] = pts[0] + qp * (pts[1] - pts[0])
                wq[k] = qw * mesh.facet_measure[fi]
            else:
                xq[k] = pts[0] + qp[:, :1] * (pts[1] - pts[0]) + qp[:, 1:2] * (pts[2] - pts[0])
                wq[k] = qw * (mesh.facet_measure[fi] / 0.5)
            normals[k] = mesh.facet_normal[fi]
        self.xq, self.wq, self.normal = xq, wq, normals

        # facet-intrinsic P2 basis at the quadrature points
        if d == 2:
            s = qp[:, 0]
            self.fval = np.column_stack(
                [(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)]
            )
        else:
            self.fval = basis_values(2, 2, qp)

    def _cell_local_index(self, space, cell):
        return int(np.flatnonzero(space.cells == cell)[0])

    def _build_side_tables(self):
        mesh = self.mesh
        d = self.dim
        self.fluid_cell = np.zeros(self.nfac, dtype=np.int64)
        self.solid_cell = np.zeros(self.nfac, dtype=np.int64)
        nloc_f = self.fluid_space.nloc
        nloc_s = self.solid_space.nloc
        self.fluid_cell_dofs = np.zeros((self.nfac, nloc_f), dtype=np.int64)
        self.solid_cell_dofs = np.zeros((self.nfac, nloc_s), dtype=np.int64)
        self.fval_cell = np.zeros((self.nfac, self.nqf, nloc_f))
        self.fgrad = np.zeros((self.nfac, self.nqf, nloc_f, d))
        self.sval_cell = np.zeros((self.nfac, self.nqf, nloc_s))
        self.sgrad = np.zeros((self.nfac, self.nqf, nloc_s, d))
        if self.pressure_space is not None:
            nloc_p = self.pressure_space.nloc
            self.pval_cell = np.zeros((self.nfac, self.nqf, nloc_p))
            self.pressure_cell_dofs = np.zeros((self.nfac, nloc_p), dtype=np.int64)
        for k, fi in enumerate(self.facets):
            fc, sc = mesh.interface_pairing[int(fi)]
            for cell, space, vtab, gtab, dtab, cellarr in (
                (fc, self.fluid_space, self.fval_cell, self.fgrad, self.fluid_cell_dofs, self.fluid_cell),
                (sc, self.solid_space, self.sval_cell, self.sgrad, self.solid_cell_dofs, self.solid_cell),
            ):
                ci = self._cell_local_index(space, cell)
                cellarr[k] = ci
                dtab[k] = space.cell_dofs[ci]
                verts = mesh.vertices[mesh.cells[cell]]
                J = (verts[1:] - verts[0]).T
                Jinv = np.linalg.inv(J)
                ref = (self.xq[k] - verts[0]) @ Jinv.T
                vtab[k] = basis_values(d, space.degree, ref)
                gref = basis_grads(d, space.degree, ref)
                gtab[k] = np.einsum("ji,qaj->qai", Jinv, gref)
            if self.pressure_space is not None:
                ps = self.pressure_space
                ci = self._cell_local_index(ps, fc)
                self.pressure_cell_dofs[k] = ps.cell_dofs[ci]
                verts = mesh.vertices[mesh.cells[fc]]
                J = (verts[1:] - verts[0]).T
                ref = (self.xq[k] - verts[0]) @ np.linalg.inv(J).T
                self.pval_cell[k] = basis_values(d, ps.degree, ref)

    def _build_mass(self):
        elem = np.einsum("kq,qa,qb->kab", self.wq, self.fval, self.fval)
        rows = np.repeat(self.facet_trace, self.nlocf, axis=1).ravel()
        cols = np.tile(self.facet_trace, (1, self.nlocf)).ravel()
        M = sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(self.ntr, self.ntr)).tocsr()
        self.M_scalar = M
        self.M_vec = sp.kron(M, sp.eye(self.ncomp), format="csr")
        self._M_vec_solve = sp.linalg.factorized(self.M_vec.tocsc())

        # coupling blocks: rows in volume vector dofs, cols in trace vector dofs
        def expand(vol_scalar):
            rows_v = []
            cols_v = []
            vals_v = []
            Mcoo = M.tocoo()
            for r, c, v in zip(Mcoo.row, Mcoo.col, Mcoo.data):
                for comp in range(self.ncomp):
                    rows_v.append(vol_scalar[r] * self.ncomp + comp)
                    cols_v.append(c * self.ncomp + comp)
                    vals_v.append(v)
            return rows_v, cols_v, vals_v

        rf, cf, vf = expand(self.trace_to_fluid)
        self.C_fluid = sp.coo_matrix(
            (vf, (rf, cf)), shape=(self.fluid_space.ndof, self.nlam)
        ).tocsr()
        rs, cs, vs = expand(self.trace_to_solid)
        self.C_solid = sp.coo_matrix(
            (vs, (rs, cs)), shape=(self.solid_space.ndof, self.nlam)
        ).tocsr()

    # -- evaluation ------------------------------------------------------------

    def trace_qp(self, lam):
        """Trace field values at facet quadrature points: (nfac, nqf, ncomp)."""
        u = np.asarray(lam).reshape(self.ntr, self.ncomp)[self.facet_trace]
        return np.einsum("qa,kac->kqc", self.fval, u)

    def fluid_qp(self, dofs):
        u = self.fluid_space._as_nodal(dofs)[self.fluid_cell_dofs]
        return np.einsum("kqa,kac->kqc", self.fval_cell, u)

    def fluid_grad_qp(self, dofs):
        u = self.fluid_space._as_nodal(dofs)[self.fluid_cell_dofs]
        return np.einsum("kqai,kac->kqci", self.fgrad, u)

    def solid_qp(self, dofs):
        u = self.solid_space._as_nodal(dofs)[self.solid_cell_dofs]
        return np.einsum("kqa,kac->kqc", self.sval_cell, u)

    def solid_grad_qp(self, dofs):
        u = self.solid_space._as_nodal(dofs)[self.solid_cell_dofs]
        return np.einsum("kqai,kac->kqci", self.sgrad, u)

    def pressure_qp(self, dofs):
        u = np.asarray(dofs)[self.pressure_cell_dofs]
        return np.einsum("kqa,ka->kq", self.pval_cell, u)

    def integrate(self, values_qp):
        """Integrate scalar samples (nfac, nqf) over the interface."""
        return float(np.sum(self.wq * values_qp))

    def l2_norm_sq(self, values_qp):
        return self.integrate(np.einsum("kqc,kqc->kq", values_qp, values_qp))

    def functional(self, values_qp):
        """Trace-space dual vector of samples (nfac, nqf, ncomp)."""
        elem = np.einsum("kq,qa,kqc->kac", self.wq, self.fval, values_qp)
        out = np.zeros(self.nlam)
        vdofs = self.facet_trace[:, :, None] * self.ncomp + np.arange(self.ncomp)
        np.add.at(out, vdofs.ravel(), elem.ravel())
        return out

    def project(self, values_qp):
        """L2(interface) projection of qp samples onto the trace space."""
        return self._M_vec_solve(self.functional(values_qp))

    def dual_norm(self, functional_vec):
        """Norm of a trace functional in the discrete dual pairing."""
        return float(np.sqrt(functional_vec @ self._M_vec_solve(functional_vec)))
