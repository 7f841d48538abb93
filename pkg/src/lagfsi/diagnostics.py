"""Energies, dissipation, energy-balance residuals and decay-rate fits.

Level-j quantities use the time-differentiated system: w^(0..2) come from
the integrator states, w^(3), w^(4) and all v^(j), lambda^(j) from backward
differences over the state history ring.  The j = 0 and j = 1 balance
residuals use the scheme's own interface traction (and its differences),
which makes them pure time-discretization errors; the j = 2, 3 residuals
are soft diagnostics: they carry the computable commutator remainders but
omit the third-order coefficient-rate couplings, so they are expected to
floor at cubic order in the data rather than vanish.
"""

import logging
from math import comb, nan

import numpy as np

from . import mesh as meshmod
from .errors import FitDomainError, PreconditionError
from .material import remainder_bracket
from .quadrature import facet_rule
from .spaces import FieldSpace

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "t", "V0e", "V0", "V1e", "V1", "V2e", "V2", "V3e", "V3",
    "D0", "D1", "D2", "D3", "Q", "Ee", "L", "X",
    "res_j0", "res_j1", "res_j2_soft", "res_j3_soft",
    "iface_vel", "iface_stress", "min_ellip", "dist_aaT", "det_min",
]


def backward_difference(values, j, dt):
    """j-th backward difference of a dof-vector history (oldest first);
    exact for polynomials in time of degree <= j.  None if too short."""
    if j == 0:
        return np.asarray(values[-1])
    if len(values) < j + 1:
        return None
    out = 0.0
    for k in range(j + 1):
        out = out + (-1) ** k * comb(j, k) * np.asarray(values[-1 - k])
    return out / dt**j


def _w_derivative(states, j, dt):
    if j == 0:
        return states[-1].w
    if j == 1:
        return states[-1].wt
    if j == 2:
        return states[-1].wtt
    return backward_difference([s.wtt for s in states], j - 2, dt)


def _v_derivative(states, j, dt):
    return backward_difference([s.v for s in states], j, dt)


def _lam_derivative(states, j, dt):
    return backward_difference([s.lam for s in states], j, dt)


class EnergyReport:
    """All diagnostic quantities at one time instant (CSV row + integrands)."""

    def __init__(self, t):
        self.t = t
        for name in CSV_COLUMNS[1:]:
            setattr(self, name, nan)
        self.integrands = {}
        self.bounds = None

    def row(self):
        return [getattr(self, c) if c != "t" else self.t for c in CSV_COLUMNS]


def _visc_form(space, aaT, Dv):
    vals = np.einsum("cqjk,cqik,cqij->cq", aaT, Dv, Dv)
    return space.integrate(vals)


def coefficient_rate_terms(space, aaT_t, a_t, q, q_t, Dv, Dv1):
    """The three volume pairings of the coefficient-rate perturbation:
    <d_t(a a^T) Dv, Dv_t>, <a_t q, Dv_t> and <a_t q_t, Dv>."""
    ra = space.integrate(np.einsum("cqjk,cqik,cqij->cq", aaT_t, Dv, Dv1))
    rb = space.integrate(q * np.einsum("cqki,cqik->cq", a_t, Dv1))
    rc = space.integrate(q_t * np.einsum("cqki,cqik->cq", a_t, Dv))
    return ra, rb, rc


def _facet_traction_material(iface, model, Dw_f, G_f):
    """(l_{G} D^2W(Dw + I)) nu at interface quadrature points."""
    d = iface.dim
    F = Dw_f + np.eye(d)
    M = model.d2_contract(F, G_f)
    return np.einsum("kqia,ka->kqi", M, iface.normal)


def compute_report(problem, model, cfg, states):
    """Build the EnergyReport for the newest state in `states` (oldest first)."""
    st = states[-1]
    dt = cfg.dt
    gamma = cfg.gamma
    vs, ps, ss = problem.vspace, problem.pspace, problem.sspace
    iface = problem.interface
    d = problem.mesh.dimension
    I = np.eye(d)
    rep = EnergyReport(st.time)

    # -- kinematic bounds ------------------------------------------------------
    from .kinematics import kinematic_bounds_report

    bounds = kinematic_bounds_report(st.kin)
    rep.bounds = bounds
    rep.min_ellip = bounds.min_ellipticity
    rep.dist_aaT = bounds.sup_dist_aaT_identity
    rep.det_min = bounds.det_min

    # -- level energies --------------------------------------------------------
    Dw = ss.grad_qp(st.w)
    Dwt = ss.grad_qp(st.wt)
    Dwtt = ss.grad_qp(st.wtt)
    F = Dw + I
    w3 = _w_derivative(states, 3, dt)
    w4 = _w_derivative(states, 4, dt)

    rep.V0e = 0.5 * (
        ss.l2_norm_sq(st.wt) + ss.l2_norm_sq(st.w)
        + ss.integrate(model.secant_form(Dw, Dw, Dw))
    )
    rep.V0 = rep.V0e + 0.5 * vs.l2_norm_sq(st.v)
    rep.V1e = 0.5 * (
        ss.l2_norm_sq(st.wtt) + ss.l2_norm_sq(st.wt)
        + ss.integrate(model.d2_form(F, Dwt, Dwt))
    )
    v1 = _v_derivative(states, 1, dt)
    v2 = _v_derivative(states, 2, dt)
    v3 = _v_derivative(states, 3, dt)
    rep.V1 = rep.V1e + 0.5 * vs.l2_norm_sq(v1) if v1 is not None else nan
    if w3 is not None:
        rep.V2e = 0.5 * (
            ss.l2_norm_sq(w3) + ss.l2_norm_sq(st.wtt)
            + ss.integrate(model.d2_form(F, Dwtt, Dwtt))
        )
        rep.V2 = rep.V2e + 0.5 * vs.l2_norm_sq(v2) if v2 is not None else nan
    if w4 is not None:
        Dw3 = ss.grad_qp(w3)
        rep.V3e = 0.5 * (
            ss.l2_norm_sq(w4) + ss.l2_norm_sq(w3)
            + ss.integrate(model.d2_form(F, Dw3, Dw3))
        )
        rep.V3 = rep.V3e + 0.5 * vs.l2_norm_sq(v3) if v3 is not None else nan

    # -- dissipation and balance integrands -------------------------------------
    aaT = st.kin.aaT
    Dv = vs.grad_qp(st.v)
    lam_qp = iface.trace_qp(st.lam)
    g = rep.integrands
    g["d0_visc"] = _visc_form(vs, aaT, Dv)
    g["d0_bnd"] = iface.l2_norm_sq(lam_qp)
    g["nw2"] = 0.5 * ss.integrate(model.nprime_form(Dw, Dwt, Dw, Dw))
    rep.D0 = g["d0_visc"] + gamma * g["d0_bnd"]

    lam1 = _lam_derivative(states, 1, dt)
    if v1 is not None and lam1 is not None:
        Dv1 = vs.grad_qp(v1)
        g["d1_visc"] = _visc_form(vs, aaT, Dv1)
        g["d1_bnd"] = iface.l2_norm_sq(iface.trace_qp(lam1))
        rep.D1 = g["d1_visc"] + gamma * g["d1_bnd"]
        g["d3w1"] = 0.5 * ss.integrate(model.d3_form(F, Dwt, Dwt, Dwt))
        # coefficient-rate couplings of the differentiated momentum balance
        aaT_t = backward_difference([s.kin.aaT for s in states], 1, dt)
        a_t = backward_difference([s.kin.a for s in states], 1, dt)
        q_qp = st.q_qp()
        q_t = backward_difference([s.q_qp() for s in states], 1, dt)
        ra, rb, rc = coefficient_rate_terms(vs, aaT_t, a_t, q_qp, q_t, Dv, Dv1)
        g["r1_term"] = -ra + rb - rc

    Dw_f = iface.solid_grad_qp(st.w)
    Dwt_f = iface.solid_grad_qp(st.wt)
    Dwtt_f = iface.solid_grad_qp(st.wtt)
    if w3 is not None and v2 is not None:
        trac2 = _facet_traction_material(iface, model, Dw_f, Dwtt_f)
        g["d2_visc"] = _visc_form(vs, aaT, vs.grad_qp(v2))
        g["d2_bnd"] = iface.l2_norm_sq(trac2)
        rep.D2 = g["d2_visc"] + gamma * g["d2_bnd"]
        g["d3w2"] = 0.5 * ss.integrate(model.d3_form(F, Dwtt, Dwtt, Dwt))
        # commutator remainder couplings at level 2
        delta1 = remainder_bracket(model, Dw, [Dwt, Dwtt], 1)
        delta1_f = remainder_bracket(model, Dw_f, [Dwt_f, Dwtt_f], 1)
        r1_nu = np.einsum("kqia,ka->kqi", delta1_f, iface.normal)
        rvec = _div_functional(ss, iface, delta1, r1_nu)
        g["r1_vol_w3"] = float(rvec @ w3)
        v2_f = iface.fluid_qp(v2)
        g["r1_surf_v"] = iface.integrate(np.einsum("kqi,kqi->kq", r1_nu, v2_f))
        g["r1_surf_lam"] = iface.integrate(np.einsum("kqi,kqi->kq", r1_nu, trac2))

    if w4 is not None and v3 is not None:
        Dw3 = ss.grad_qp(w3)
        Dw3_f = iface.solid_grad_qp(w3)
        trac3 = _facet_traction_material(iface, model, Dw_f, Dw3_f)
        g["d3_visc"] = _visc_form(vs, aaT, vs.grad_qp(v3))
        g["d3_bnd"] = iface.l2_norm_sq(trac3)
        rep.D3 = g["d3_visc"] + gamma * g["d3_bnd"]
        g["d3w3"] = 0.5 * ss.integrate(model.d3_form(F, Dw3, Dw3, Dwt))
        delta2 = remainder_bracket(model, Dw, [Dwt, Dwtt, Dw3], 2)
        delta2_f = remainder_bracket(model, Dw_f, [Dwt_f, Dwtt_f, Dw3_f], 2)
        r2_nu = np.einsum("kqia,ka->kqi", delta2_f, iface.normal)
        rvec2 = _div_functional(ss, iface, delta2, r2_nu)
        g["r2_vol_w4"] = float(rvec2 @ w4)
        v3_f = iface.fluid_qp(v3)
        g["r2_surf_v"] = iface.integrate(np.einsum("kqi,kqi->kq", r2_nu, v3_f))
        g["r2_surf_lam"] = iface.integrate(np.einsum("kqi,kqi->kq", r2_nu, trac3))

    # -- totals ------------------------------------------------------------------
    rep.Q = rep.V0 + rep.V1 + rep.V2 + rep.V3
    rep.Ee, rep.L = _sobolev_ledger_values(ss, states, dt)
    g["gradsq0"] = vs.grad_norm_sq(st.v)
    if v1 is not None and v2 is not None:
        g["gradsq1"] = vs.grad_norm_sq(v1)
        g["gradsq2"] = vs.grad_norm_sq(v2)
        rep.X = rep.Q + cfg.epsilon1 * (g["gradsq0"] + g["gradsq1"] + g["gradsq2"])

    rep.iface_vel, rep.iface_stress = interface_residual_values(st, model, gamma)
    if max(rep.iface_vel, rep.iface_stress) > cfg.coupling_tol:
        log.warning(
            "interface residuals (%.3e, %.3e) exceed coupling tolerance %.1e at t=%.4g",
            rep.iface_vel, rep.iface_stress, cfg.coupling_tol, st.time,
        )
    return rep


def _div_functional(space, iface, delta_vol, delta_nu_facet):
    """Weak functional of div(delta): -<delta, D phi> + <delta nu, phi>_Gc."""
    elem = -np.einsum("cq,cqib,cqab->cai", space.wdet, delta_vol, space.gradq)
    out = space.scatter_vector(elem.reshape(len(space.cells), -1))
    surf = np.einsum("kq,kqa,kqc->kac", iface.wq, iface.sval_cell, delta_nu_facet)
    vdofs = iface.solid_cell_dofs[:, :, None] * space.ncomp + np.arange(space.ncomp)
    np.add.at(out, vdofs.ravel(), np.ascontiguousarray(surf).ravel())
    return out


def remainder(states, model, j, dt):
    """Weak commutator remainder r_j and its interface trace r_{j,Gc}.

    Needs discrete time derivatives of w up to order j + 1; returns the
    functional over solid test functions and the facet-point values of the
    bracketed tensor times nu.
    """
    st = states[-1]
    problem = st.problem
    ss, iface = problem.sspace, problem.interface
    rates = [ss.grad_qp(st.wt), ss.grad_qp(st.wtt)]
    rates_f = [iface.solid_grad_qp(st.wt), iface.solid_grad_qp(st.wtt)]
    if j == 2:
        w3 = _w_derivative(states, 3, dt)
        if w3 is None:
            raise PreconditionError("remainder at j=2 needs history depth >= 2")
        rates.append(ss.grad_qp(w3))
        rates_f.append(iface.solid_grad_qp(w3))
    Dw = ss.grad_qp(st.w)
    Dw_f = iface.solid_grad_qp(st.w)
    delta = remainder_bracket(model, Dw, rates, j)
    delta_f = remainder_bracket(model, Dw_f, rates_f, j)
    r_nu = np.einsum("kqia,ka->kqi", delta_f, iface.normal)
    return _div_functional(ss, iface, delta, r_nu), r_nu


def ledger_remainder(Ee):
    """Power-sum remainder sum_{k=3}^{8} Ee^{k/2}."""
    return sum(Ee ** (k / 2) for k in range(3, 9))


def _sobolev_ledger_values(ss, states, dt):
    """E^e as a broken Sobolev sum truncated at representable derivatives,
    and the power-sum remainder L."""
    total = 0.0
    for k in range(5):
        wk = _w_derivative(states, k, dt)
        if wk is None:
            return nan, nan
        total += ss.broken_sobolev_sq(wk, 4 - k)
    return total, ledger_remainder(total)


def level_energy(states, model, j, dt):
    """(V_j^e, V_j) from the newest state; NaN pair when history is short."""
    st = states[-1]
    problem = st.problem
    ss, vs = problem.sspace, problem.vspace
    d = problem.mesh.dimension
    wq = _w_derivative(states, j, dt)
    wq1 = _w_derivative(states, j + 1, dt)
    vq = _v_derivative(states, j, dt)
    if wq is None or wq1 is None:
        return nan, nan
    Dwj = ss.grad_qp(wq)
    if j == 0:
        quad = ss.integrate(model.secant_form(Dwj, Dwj, Dwj))
    else:
        F = ss.grad_qp(st.w) + np.eye(d)
        quad = ss.integrate(model.d2_form(F, Dwj, Dwj))
    Ve = 0.5 * (ss.l2_norm_sq(wq1) + ss.l2_norm_sq(wq) + quad)
    V = Ve + 0.5 * vs.l2_norm_sq(vq) if vq is not None else nan
    return Ve, V


def dissipation(states, model, gamma, j, dt):
    """D_j with the exact coefficient quadratic form and the level-j
    boundary traction (scheme traction for j = 0, 1; linearized elastic
    traction for j = 2, 3)."""
    st = states[-1]
    problem = st.problem
    vs, ss, iface = problem.vspace, problem.sspace, problem.interface
    vq = _v_derivative(states, j, dt)
    if vq is None:
        return nan
    fluid_part = _visc_form(vs, st.kin.aaT, vs.grad_qp(vq))
    if j <= 1:
        lamj = _lam_derivative(states, j, dt)
        if lamj is None:
            return nan
        bnd = iface.l2_norm_sq(iface.trace_qp(lamj))
    else:
        wj = _w_derivative(states, j, dt)
        if wj is None:
            return nan
        trac = _facet_traction_material(
            iface, model, iface.solid_grad_qp(st.w), iface.solid_grad_qp(wj)
        )
        bnd = iface.l2_norm_sq(trac)
    return fluid_part + gamma * bnd


def sobolev_ledger(states, dt):
    st = states[-1]
    return _sobolev_ledger_values(st.problem.sspace, states, dt)


def interface_residual_values(state, model, gamma):
    """Velocity-matching L2 residual and stress-matching dual-norm residual
    of the transmission conditions, with the elastic traction from w."""
    problem = state.problem
    iface = problem.interface
    wt_qp = iface.solid_qp(state.wt)
    v_qp = iface.fluid_qp(state.v)
    Dw_f = iface.solid_grad_qp(state.w)
    d = iface.dim
    P = model.piola_stress(Dw_f + np.eye(d))
    trac = np.einsum("kqia,ka->kqi", P, iface.normal)
    vel = np.sqrt(iface.l2_norm_sq(wt_qp - v_qp + gamma * trac))
    Dv_f = iface.fluid_grad_qp(state.v)
    q_f = iface.pressure_qp(state.q)
    nu = iface.normal[:, None, :]
    T_f = np.einsum("kqjl,kqil,kqj->kqi", state.kin.aaT_facet, Dv_f, np.broadcast_to(nu, Dv_f.shape[:2] + (d,)))
    T_f = T_f - q_f[:, :, None] * np.einsum("kqli,kql->kqi", state.kin.a_facet, np.broadcast_to(nu, Dv_f.shape[:2] + (d,)))
    stress = iface.dual_norm(iface.functional(trac - T_f))
    return float(vel), float(stress)


class TrajectoryRecorder:
    """Per-step reports plus running trapezoidal balance residuals."""

    def __init__(self, problem, model, cfg):
        self.problem = problem
        self.model = model
        self.cfg = cfg
        self.reports = []

    def add(self, state):
        rep = compute_report(self.problem, self.model, self.cfg, state.past())
        self.reports.append(rep)
        n = len(self.reports) - 1
        gamma = self.cfg.gamma
        for j, (res_name, Vname) in enumerate(
            [("res_j0", "V0"), ("res_j1", "V1"), ("res_j2_soft", "V2"), ("res_j3_soft", "V3")]
        ):
            val = energy_identity_residual(self.reports, gamma, j)
            setattr(rep, res_name, val)
        return rep


def _level_integrand(rep, gamma, j):
    """Signed balance integrand g_j(t); NaN when pieces are unavailable."""
    g = rep.integrands
    try:
        if j == 0:
            return g["d0_visc"] + gamma * g["d0_bnd"] - g["nw2"]
        if j == 1:
            return g["d1_visc"] + gamma * g["d1_bnd"] - g["r1_term"] - g["d3w1"]
        if j == 2:
            return (
                g["d2_visc"] + gamma * g["d2_bnd"] + g["r1_surf_v"]
                + gamma * g["r1_surf_lam"] - g["r1_vol_w3"] - g["d3w2"]
            )
        return (
            g["d3_visc"] + gamma * g["d3_bnd"] + g["r2_surf_v"]
            + gamma * g["r2_surf_lam"] - g["r2_vol_w4"] - g["d3w3"]
        )
    except KeyError:
        return nan


def energy_identity_residual(reports, gamma, j, window=None):
    """Integrated level-j balance residual  [V_j]_s^t + int_s^t g_j dtau
    by trapezoidal quadrature over the stored reports.

    Without an explicit window the residual runs from the first report with
    all level-j pieces available to the last.
    """
    Vname = ["V0", "V1", "V2", "V3"][j]
    ts = np.array([r.t for r in reports])
    Vs = np.array([getattr(r, Vname) for r in reports], dtype=float)
    gs = np.array([_level_integrand(r, gamma, j) for r in reports], dtype=float)
    valid = ~(np.isnan(Vs) | np.isnan(gs))
    if window is not None:
        valid &= (ts >= window[0] - 1e-12) & (ts <= window[1] + 1e-12)
    idx = np.flatnonzero(valid)
    if len(idx) < 2 or not np.all(np.diff(idx) == 1):
        idx = idx[np.searchsorted(idx, idx[0]):] if len(idx) else idx
    if len(idx) < 2:
        return nan
    sl = slice(idx[0], idx[-1] + 1)
    integral = float(np.trapezoid(gs[sl], ts[sl]))
    return (Vs[idx[-1]] - Vs[idx[0]]) + integral


def perturbation_integral_R1(reports, window=None):
    """Time integral of the coefficient-rate perturbation pairing
    (trapezoidal over reports): -<d_t(a a^T) Dv, Dv_t> + <a_t q, Dv_t>
    - <a_t q_t, Dv>, accumulated over the window."""
    ts = np.array([r.t for r in reports])
    gs = np.array([r.integrands.get("r1_term", nan) for r in reports], dtype=float)
    valid = ~np.isnan(gs)
    if window is not None:
        valid &= (ts >= window[0] - 1e-12) & (ts <= window[1] + 1e-12)
    idx = np.flatnonzero(valid)
    if len(idx) < 2:
        return nan
    sl = slice(idx[0], idx[-1] + 1)
    return float(np.trapezoid(gs[sl], ts[sl]))


def fit_decay_rate(series, window=None, floor_factor=100.0):
    """Least-squares fit of log X(t) = log C - sigma t.

    Returns (C, sigma, R^2).  Samples at the floor (below floor_factor *
    machine epsilon relative to the first sample) are excluded; nonpositive
    samples or fewer than 10 usable points raise FitDomainError.
    """
    arr = np.asarray([(t, x) for t, x in series], dtype=float)
    arr = arr[~np.isnan(arr[:, 1])]
    if len(arr) == 0:
        raise FitDomainError("no samples")
    x0 = arr[0, 1]
    if window is None:
        tmax = arr[-1, 0]
        window = (tmax / 2, tmax)
    sel = (arr[:, 0] >= window[0] - 1e-12) & (arr[:, 0] <= window[1] + 1e-12)
    arr = arr[sel]
    floor = floor_factor * np.finfo(float).eps * abs(x0)
    arr = arr[np.abs(arr[:, 1]) > floor]
    if len(arr) and np.any(arr[:, 1] <= 0):
        raise FitDomainError("nonpositive samples in fit window (floor reached)")
    if len(arr) < 10:
        raise FitDomainError(f"only {len(arr)} usable samples in fit window")
    t, y = arr[:, 0], np.log(arr[:, 1])
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(coef[1])), float(-coef[0]), r2


# -- multiplier identities -------------------------------------------------------


class RadialMultiplier:
    """H(x) = x - x0, the star-shape multiplier field."""

    def __init__(self, x0):
        self.x0 = np.asarray(x0, dtype=float)

    def value(self, x):
        return x - self.x0

    def grad(self, x):
        d = len(self.x0)
        return np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()

    def div(self, x):
        return np.full(x.shape[:-1], float(len(self.x0)))


class ScalarField:
    """C^1 scalar multiplier with closed-form gradient."""

    def __init__(self, value, grad):
        self.value = value
        self.grad = grad


def constant_scalar(c):
    return ScalarField(lambda x: np.full(x.shape[:-1], float(c)),
                       lambda x: np.zeros_like(x))


class _AwEvaluator:
    """Frozen-coefficient quadratic form A_w at base displacement w.

    flavor 'secant' uses the averaged Hessian (the j = 0 energy form),
    'hessian' the Hessian at Dw + I (the differentiated levels).
    """

    def __init__(self, model, flavor, base):
        self.model = model
        self.flavor = flavor
        self.base = base

    def _Dw(self, x):
        if self.base is None:
            d = x.shape[-1]
            return np.zeros(x.shape[:-1] + (d, d))
        return self.base.grad(x)

    def form(self, x, G, H):
        Dw = self._Dw(x)
        if self.flavor == "secant":
            return self.model.secant_form(Dw, G, H)
        d = x.shape[-1]
        return self.model.d2_form(Dw + np.eye(d), G, H)

    def contract(self, x, G):
        Dw = self._Dw(x)
        if self.flavor == "secant":
            return self.model.secant_contract(Dw, G)
        d = x.shape[-1]
        return self.model.d2_contract(Dw + np.eye(d), G)

    def d_form(self, x, A, B, C):
        """DA_w(A, B, C): third slot takes the coefficient-direction matrix."""
        Dw = self._Dw(x)
        if self.flavor == "secant":
            return self.model.nprime_form(Dw, A, B, C)
        d = x.shape[-1]
        return self.model.d3_form(Dw + np.eye(d), A, B, C)

    def d_contract(self, x, G, H):
        Dw = self._Dw(x)
        if self.flavor == "secant":
            return self.model.nprime_contract(Dw, G, H)
        d = x.shape[-1]
        return self.model.d3_contract(Dw + np.eye(d), G, H)

    def divergence(self, x, hat_grad, hat_hess):
        """div(l_{D hat w} A_w) pointwise, using the base-field curvature."""
        d = x.shape[-1]
        out = np.zeros(x.shape[:-1] + (d,))
        for alpha in range(d):
            M = self.contract(x, hat_hess[..., alpha])
            out += M[..., :, alpha]
        if self.base is not None:
            bh = self.base.hess(x)
            for alpha in range(d):
                M = self.d_contract(x, hat_grad, bh[..., alpha])
                out += M[..., :, alpha]
        return out


def multiplier_identity_residual(mesh, model, hat, H, rho, xi, interval,
                                 base=None, flavor="secant",
                                 quad_degree=5, time_points=20):
    """Residuals of the two integration-by-parts multiplier identities.

    `hat` is a manufactured displacement with vectorized callables
    value/dt1/dt2/grad/hess of (x, t); its equation remainder r is defined
    from the field itself, so both identities must vanish to quadrature
    accuracy.  Returns (residual of the vector-multiplier identity,
    residual of the scalar-multiplier identity).
    """
    d = mesh.dimension
    space = FieldSpace(mesh, meshmod.SOLID, "tmp", 2, d, quad_degree=quad_degree)
    X = space.xq.reshape(-1, d)
    W = space.wdet.reshape(-1)
    fq, fw, fnu = _interface_quadrature(mesh, quad_degree)
    Aw = _AwEvaluator(model, flavor, base)

    s_t, t_t = interval
    tn, tw = np.polynomial.legendre.leggauss(time_points)
    tn = 0.5 * (tn + 1) * (t_t - s_t) + s_t
    tw = 0.5 * tw * (t_t - s_t)

    Hx, DHx, divHx = H.value(X), H.grad(X), H.div(X)
    Hf = H.value(fq)
    xix, dxix = xi.value(X), xi.grad(X)
    xif = xi.value(fq)

    def r_field(x, t):
        wtt = hat.dt2(x, t)
        w = hat.value(x, t)
        gw = hat.grad(x, t)
        hw = hat.hess(x, t)
        return wtt - Aw.divergence(x, gw, hw) + w

    def endpoint36(t):
        wt = hat.dt1(X, t)
        gw = hat.grad(X, t)
        w = hat.value(X, t)
        mult = 2 * np.einsum("nia,na->ni", gw, Hx) + rho * w
        return float(np.sum(W * np.einsum("ni,ni->n", wt, mult)))

    def endpoint37(t):
        wt = hat.dt1(X, t)
        w = hat.value(X, t)
        return float(np.sum(W * xix * np.einsum("ni,ni->n", wt, w)))

    lhs36 = rhs36 = 0.0
    lhs37 = rhs37 = 0.0
    for t, wgt in zip(tn, tw):
        w_v = hat.value(X, t)
        wt_v = hat.dt1(X, t)
        gw_v = hat.grad(X, t)
        Aww = Aw.form(X, gw_v, gw_v)
        quad_v = np.einsum("ni,ni->n", wt_v, wt_v) - Aww - np.einsum("ni,ni->n", w_v, w_v)
        mult_v = 2 * np.einsum("nia,na->ni", gw_v, Hx) + rho * w_v
        r_v = r_field(X, t)
        gwDH = np.einsum("nik,nkj->nij", gw_v, DHx)
        vol36 = (
            np.sum(W * quad_v * (divHx - rho))
            + 2 * np.sum(W * Aw.form(X, gw_v, gwDH))
            - _da_term(Aw, X, W, gw_v, Hx, base)
            - np.sum(W * np.einsum("ni,ni->n", r_v, mult_v))
        )
        rhs36 += wgt * vol36

        w_f = hat.value(fq, t)
        wt_f = hat.dt1(fq, t)
        gw_f = hat.grad(fq, t)
        Aww_f = Aw.form(fq, gw_f, gw_f)
        quad_f = np.einsum("ni,ni->n", wt_f, wt_f) - Aww_f - np.einsum("ni,ni->n", w_f, w_f)
        tracA = np.einsum("nia,na->ni", Aw.contract(fq, gw_f), fnu)
        mult_f = 2 * np.einsum("nia,na->ni", gw_f, Hf) + rho * w_f
        lhs36 += wgt * (
            np.sum(fw * quad_f * np.einsum("na,na->n", Hf, fnu))
            + np.sum(fw * np.einsum("ni,ni->n", tracA, mult_f))
        )

        # scalar-multiplier identity, accumulated as (LHS - RHS) pieces
        lhs37 += wgt * np.sum(fw * xif * np.einsum("ni,ni->n", tracA, w_f))
        rhs37 += wgt * (
            -np.sum(W * xix * np.einsum("ni,ni->n", r_v, w_v))
            + np.sum(W * xix * (np.einsum("ni,ni->n", w_v, w_v)
                                - np.einsum("ni,ni->n", wt_v, wt_v)))
            + np.sum(W * xix * Aww)
            + np.sum(W * Aw.form(X, gw_v, np.einsum("ni,na->nia", w_v, dxix)))
        )

    rhs36 += endpoint36(t_t) - endpoint36(s_t)
    rhs37_end = endpoint37(t_t) - endpoint37(s_t)
    res36 = lhs36 - rhs36
    res37 = (rhs37_end + rhs37) - lhs37
    return float(res36), float(res37)


def _da_term(Aw, X, W, gw, Hx, base):
    """int DA_w(D hat w, D hat w, D_H Dw) dx over the current quadrature."""
    if base is None:
        return 0.0
    bh = base.hess(X)  # (n, i, a, b)
    DHDw = np.einsum("niab,nb->nia", bh, Hx)
    return np.sum(W * Aw.d_form(X, gw, gw, DHDw))


def _interface_quadrature(mesh, degree):
    d = mesh.dimension
    qp, qw = facet_rule(d, degree)
    xs, ws, nus = [], [], []
    for fi in mesh.facet_indices(meshmod.INTERFACE):
        pts = mesh.vertices[mesh.facets[fi]]
        if d == 2:
            x = pts[0] + qp * (pts[1] - pts[0])
            w = qw * mesh.facet_measure[fi]
        else:
            x = pts[0] + qp[:, :1] * (pts[1] - pts[0]) + qp[:, 1:2] * (pts[2] - pts[0])
            w = qw * (mesh.facet_measure[fi] / 0.5)
        xs.append(x)
        ws.append(w)
        nus.append(np.broadcast_to(mesh.facet_normal[fi], x.shape).copy())
    return np.vstack(xs), np.concatenate(ws), np.vstack(nus)


def write_csv(path, reports):
    """Write reports in the canonical column order; floats use shortest
    round-trip formatting so identical runs emit identical bytes."""
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rep in reports:
            fh.write(",".join(repr(float(x)) for x in rep.row()) + "\n")
