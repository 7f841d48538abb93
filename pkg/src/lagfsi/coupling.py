"""Monolithic coupling of fluid, solid and the damped interface conditions.

One time step solves for (v, q, w, lambda) at t + dt, where lambda is the
interface traction field on the shared trace space.  The transmission
conditions enter weakly and symmetrically:

* fluid momentum rows carry + int_Gc <lambda, phi_f>, so the fluid's
  natural boundary condition identifies lambda with its traction
  (a a^T Dv) nu - q (a nu)  (stress matching);
* solid rows carry - int_Gc <lambda, phi_s>, identifying lambda with the
  elastic traction DW(Dw + I) nu;
* trace rows impose  v - w_t - gamma lambda = 0  on the interface
  (damped velocity matching), a Robin-type closure that degenerates to
  plain velocity matching at gamma = 0.

Testing the fluid rows with v and the solid rows with w_t makes the
interface exchange terms cancel up to the exact dissipation
gamma ||lambda||^2, which is what the energy-identity diagnostics check.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import diagnostics, fluid as fluidmod, mesh as meshmod, solid as solidmod
from .errors import PreconditionError, SolverError
from .kinematics import KinematicState, advance_flow_map
from .spaces import FieldSpace, InterfaceData

log = logging.getLogger(__name__)


@dataclass
class CouplingConfig:
    """Knobs of the coupled time stepper and its diagnostics."""

    gamma: float = 1.0
    dt: float = 1e-3
    t_end: float = 2.0
    newton_tol: float = 1e-10
    newton_maxit: int = 25
    epsilon1: float = 0.1
    viscosity: float = 1.0
    include_convection: bool = False
    epsilon0: float = 1e-2  # smallness screen on initial data norms
    allow_large: bool = False
    coupling_tol: float = 1e-3
    csv_path: str = ""
    vtk_every: int = 0
    vtk_prefix: str = "state"
    dump_systems: bool = False
    dump_prefix: str = "system"

    def __post_init__(self):
        if self.gamma < 0:
            raise PreconditionError("gamma must be nonnegative")
        if self.dt <= 0:
            raise PreconditionError("dt must be positive")
        if self.epsilon1 <= 0:
            raise PreconditionError("epsilon1 must be positive")


class CoupledProblem:
    """Spaces, interface structures and constant matrices on one mesh."""

    def __init__(self, mesh, model):
        d = mesh.dimension
        self.mesh = mesh
        self.model = model
        self.vspace = FieldSpace(mesh, meshmod.FLUID, "fluid-velocity", 2, d)
        self.pspace = FieldSpace(mesh, meshmod.FLUID, "fluid-pressure", 1, 1, quad_degree=5)
        self.sspace = FieldSpace(mesh, meshmod.SOLID, "solid-displacement", 2, d)
        assert self.vspace.degree == self.pspace.degree + 1  # inf-sup stable pair
        self.interface = InterfaceData(mesh, self.vspace, self.sspace, self.pspace)
        self.M_fluid = self.vspace.mass_matrix()
        self.M_solid = self.sspace.mass_matrix()
        self.free_fluid = self.vspace.free_mask(meshmod.OUTER)
        self.outer_tables = fluidmod._outer_facet_tables(mesh, self.vspace, self.pspace)
        self.identity_dofs = self.vspace.interpolate(lambda x: x)
        # interface trace nodes never sit on the outer boundary
        assert self.free_fluid[self.interface.C_fluid.tocoo().row].all()

    def sizes(self):
        nf = int(self.free_fluid.sum())
        return nf, self.pspace.nscalar, self.sspace.ndof, self.interface.nlam


class CoupledState:
    """One time level of the coupled system plus a short history ring."""

    def __init__(self, problem, v, q, w, wt, wtt, lam, kin, time, history=None):
        self.problem = problem
        self.v = v
        self.q = q
        self.w = w
        self.wt = wt
        self.wtt = wtt
        self.lam = lam
        self.kin = kin
        self.time = time
        self.history = history if history is not None else deque(maxlen=5)
        self._cache = {}

    def past(self):
        """History including self, oldest first."""
        return list(self.history) + [self]

    def q_qp(self):
        if "q_qp" not in self._cache:
            self._cache["q_qp"] = self.problem.pspace.eval_qp(self.q)[:, :, 0]
        return self._cache["q_qp"]


def initial_state(problem, cfg, model, v0, w0, w1):
    """Assemble the t = 0 state: initial pressure, consistent acceleration
    and the projected elastic traction as the initial interface field."""
    vs, ss = problem.vspace, problem.sspace
    iface = problem.interface
    norms = [
        np.sqrt(vs.l2_norm_sq(v0)),
        np.sqrt(ss.l2_norm_sq(w0)),
        np.sqrt(ss.l2_norm_sq(w1)),
    ]
    if not cfg.allow_large and max(norms) > cfg.epsilon0:
        raise PreconditionError(
            f"initial data norms {norms} exceed the smallness screen {cfg.epsilon0}; "
            "pass --allow-large to override"
        )
    kin = KinematicState.initial(vs, iface)
    q0 = fluidmod.solve_initial_pressure(problem, v0, w0, model)
    Dw_f = iface.solid_grad_qp(w0)
    trac = np.stack(
        [model.traction(Dw_f[k], iface.normal[k]) for k in range(iface.nfac)]
    ) if iface.nfac else np.zeros((0, iface.nqf, vs.ncomp))
    lam0 = iface.project(trac)
    rhs = iface.C_solid @ lam0 - solidmod.internal_force(model, ss, w0) - problem.M_solid @ w0
    wtt0 = spla.spsolve(problem.M_solid.tocsc(), rhs)
    return CoupledState(problem, np.array(v0, dtype=float), q0, np.array(w0, dtype=float),
                        np.array(w1, dtype=float), wtt0, lam0, kin, 0.0)


def _dump_system(cfg, step, iteration, J, rhs):
    path = f"{cfg.dump_prefix}_step{step}_it{iteration}.txt"
    Jc = J.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {J.shape[0]} x {J.shape[1]}, nnz {Jc.nnz}\n")
        for r, c, val in zip(Jc.row, Jc.col, Jc.data):
            fh.write(f"{r} {c} {float(val)!r}\n")
        fh.write("# rhs\n")
        for i, val in enumerate(rhs):
            fh.write(f"{i} {float(val)!r}\n")


def coupled_step(state, cfg, model, step_index=0):
    """Advance the coupled system one implicit step by monolithic Newton.

    The fluid coefficients a a^T are frozen at the current flow map; the
    flow map itself is advanced afterwards with the end-of-step velocity.
    """
    problem = state.problem
    vs, ps, ss = problem.vspace, problem.pspace, problem.sspace
    iface = problem.interface
    dt = cfg.dt
    beta, gam_n = solidmod.NEWMARK_BETA, solidmod.NEWMARK_GAMMA

    op = fluidmod.assemble_fluid_operator(state.kin, dt, cfg.viscosity, vs, ps, mass=problem.M_fluid)
    free = problem.free_fluid
    A_ff = op.A[free][:, free].tocsr()
    B_f = op.B[:, free].tocsr()
    C_f = iface.C_fluid[free].tocsr()
    C_s = iface.C_solid
    M_s = problem.M_solid
    Mg = iface.M_vec

    rhs_v = (problem.M_fluid @ state.v)[free] / dt
    if cfg.include_convection:
        rhs_v = rhs_v - fluidmod.convective_term(state.kin, state.v, vs, True)[free]

    pred_w = state.w + dt * state.wt + dt * dt * (0.5 - beta) * state.wtt
    pred_wt = state.wt + dt * (1 - gam_n) * state.wtt
    c_tt = 1.0 / (beta * dt * dt)
    c_t = gam_n / (beta * dt)

    nf, nq, nw, nl = len(rhs_v), ps.nscalar, ss.ndof, iface.nlam

    def unpack(u):
        return (u[:nf], u[nf:nf + nq], u[nf + nq:nf + nq + nw], u[nf + nq + nw:])

    def residual(u):
        vf, q, w, lam = unpack(u)
        wt = pred_wt + c_t * (w - pred_w)
        wtt = c_tt * (w - pred_w)
        Rv = A_ff @ vf - B_f.T @ q + C_f @ lam - rhs_v
        Rq = B_f @ vf
        Rw = M_s @ (wtt + w) + solidmod.internal_force(model, ss, w) - C_s @ lam
        v_tr = np.zeros(vs.ndof)
        v_tr[free] = vf
        Rl = iface.C_fluid.T @ v_tr - C_s.T @ wt - cfg.gamma * (Mg @ lam)
        return np.concatenate([Rv, Rq, Rw, Rl])

    def tangent(u):
        _, _, w, _ = unpack(u)
        A_ww = (c_tt + 1.0) * M_s + solidmod.stiffness_matrix(model, ss, w)
        return sp.bmat(
            [
                [A_ff, -B_f.T, None, C_f],
                [B_f, None, None, None],
                [None, None, A_ww, -C_s],
                [C_f.T, None, -c_t * C_s.T, -cfg.gamma * Mg],
            ],
            format="csc",
        )

    u0 = np.concatenate([state.v[free], state.q, state.w, state.lam])
    it = [0]

    def counted_tangent(u):
        J = tangent(u)
        if cfg.dump_systems:
            _dump_system(cfg, step_index, it[0], J, residual(u))
        it[0] += 1
        return J

    u, info = solidmod.newton_solve(
        residual, counted_tangent, u0, tol=cfg.newton_tol, maxit=cfg.newton_maxit
    )
    log.info(
        "step %d t=%.6g newton iterations=%d residuals=%s",
        step_index, state.time + dt, info["iterations"],
        ["%.3e" % r for r in info["residuals"]],
    )

    vf, q, w, lam = unpack(u)
    v = np.zeros(vs.ndof)
    v[free] = vf
    wt = pred_wt + c_t * (w - pred_w)
    wtt = c_tt * (w - pred_w)
    kin = advance_flow_map(state.kin, v, dt)

    history = deque(state.history, maxlen=5)
    history.append(state)
    new = CoupledState(problem, v, q, w, wt, wtt, lam, kin, state.time + dt, history)
    new.newton_info = info
    return new


def interface_residuals(state, model, gamma):
    """(velocity-matching L2 residual, stress-matching dual-norm residual)
    of the transmission conditions, with the elastic traction evaluated
    from the displacement."""
    return diagnostics.interface_residual_values(state, model, gamma)


def run_simulation(cfg, init, model, mesh):
    """Drive the coupled system from t = 0 to t_end.

    `init` supplies (v0, w0, w1) dof arrays via build(problem) or as a tuple.
    Returns (reports, final_state); writes the CSV when cfg.csv_path is set.
    """
    problem = CoupledProblem(mesh, model)
    if hasattr(init, "build"):
        v0, w0, w1 = init.build(problem)
    else:
        v0, w0, w1 = init
    state = initial_state(problem, cfg, model, v0, w0, w1)
    recorder = diagnostics.TrajectoryRecorder(problem, model, cfg)
    recorder.add(state)

    nsteps = int(round(cfg.t_end / cfg.dt))
    for n in range(1, nsteps + 1):
        try:
            state = coupled_step(state, cfg, model, step_index=n)
        except SolverError as exc:
            log.warning("step %d failed (%s); retrying with dt/2", n, exc)
            half = CouplingConfig(**{**cfg.__dict__, "dt": cfg.dt / 2})
            state = coupled_step(state, half, model, step_index=n)
            state = coupled_step(state, half, model, step_index=n)
        recorder.add(state)
        if cfg.vtk_every and n % cfg.vtk_every == 0:
            _export_state(cfg, problem, state, n)

    if cfg.csv_path:
        diagnostics.write_csv(cfg.csv_path, recorder.reports)
    return recorder.reports, state


def _export_state(cfg, problem, state, n):
    mesh = problem.mesh
    nv = len(mesh.vertices)
    d = mesh.dimension
    vel = np.zeros((nv, d))
    disp = np.zeros((nv, d))
    pres = np.zeros(nv)
    vdofs = problem.vspace.g2l[np.arange(nv)]
    mask = vdofs >= 0
    vel[mask] = state.v.reshape(-1, d)[vdofs[mask]]
    sdofs = problem.sspace.g2l[np.arange(nv)]
    mask = sdofs >= 0
    disp[mask] = state.w.reshape(-1, d)[sdofs[mask]]
    pdofs = problem.pspace.g2l[np.arange(nv)]
    mask = pdofs >= 0
    pres[mask] = state.q[pdofs[mask]]
    meshmod.export_vtk(
        mesh,
        f"{cfg.vtk_prefix}_{n:06d}.vtk",
        point_data={"velocity": vel, "displacement": disp, "pressure": pres},
    )
