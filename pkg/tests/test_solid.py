"""Elastodynamic residual/tangent, Newton behavior and Newmark conservation."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from lagfsi.coupling import CoupledProblem
from lagfsi.errors import SolverError
from lagfsi.material import make_material
from lagfsi.mesh import build_annular_mesh
from lagfsi.solid import (
    NEWMARK_BETA, NEWMARK_GAMMA, internal_force, newmark_update, newton_solve,
    solid_residual, solid_tangent, stiffness_matrix,
)

from oracle_fem import DenseStep, make_tiny_mesh

SVK = "saint-venant-kirchhoff"
LIN = "linear-isotropic"


@pytest.fixture(scope="module")
def tiny():
    mesh = make_tiny_mesh()
    model = make_material(SVK, 1.0, 1.0)
    return CoupledProblem(mesh, model), model


@pytest.fixture(scope="module")
def annulus():
    mesh = build_annular_mesh(2, 0.4, 1.0, 5)
    model = make_material(SVK, 1.0, 1.0)
    return CoupledProblem(mesh, model), model


def test_equilibrium_residual(tiny):
    problem, model = tiny
    ss = problem.sspace
    z = ss.zeros()
    R = solid_residual(model, ss, problem.interface, problem.M_solid, z, z)
    assert np.abs(R).max() == 0.0


def test_internal_force_matches_dense_oracle(tiny):
    problem, model = tiny
    ss = problem.sspace
    w = ss.interpolate(lambda x: 0.1 * np.array([x[0] ** 2, np.sin(x[1])]))
    oracle = DenseStep(problem, model)
    assert np.abs(internal_force(model, ss, w) - oracle.internal_force(w)).max() < 1e-13


def test_static_pressure_load_linear(tiny):
    # uniform normal traction: the displacement solves the linear
    # elastostatic problem with the zeroth-order term, via a dense oracle
    problem, _ = tiny
    lin = make_material(LIN, 1.0, 1.0)
    ss, iface = problem.sspace, problem.interface
    p = 1e-3
    trac = -p * np.broadcast_to(iface.normal[:, None, :], (iface.nfac, iface.nqf, 2)).copy()
    oracle = DenseStep(problem, lin)
    K = oracle.stiffness(ss.zeros()) + oracle.solid_mass()
    rhs = np.zeros(ss.ndof)
    # dense traction load, assembled facet-wise from the solid-side trace
    elem = np.einsum("kq,kqa,kqc->kac", iface.wq, iface.sval_cell, trac)
    vdofs = iface.solid_cell_dofs[:, :, None] * 2 + np.arange(2)
    np.add.at(rhs, vdofs.ravel(), elem.ravel())
    w = np.linalg.solve(K, rhs)
    R = solid_residual(lin, ss, iface, problem.M_solid, w, ss.zeros(), traction_qp=trac)
    assert np.abs(R).max() < 1e-12


def test_linear_scaling(tiny):
    problem, _ = tiny
    lin = make_material(LIN, 1.0, 1.0)
    ss = problem.sspace
    rng = np.random.default_rng(0)
    w = 1e-2 * rng.standard_normal(ss.ndof)
    wtt = 1e-2 * rng.standard_normal(ss.ndof)
    R1 = solid_residual(lin, ss, problem.interface, problem.M_solid, w, wtt)
    R3 = solid_residual(lin, ss, problem.interface, problem.M_solid, 3 * w, 3 * wtt)
    assert np.allclose(R3, 3 * R1, atol=1e-14)


def test_tangent_at_zero_matches_linear(tiny):
    problem, model = tiny
    ss = problem.sspace
    lin = make_material(LIN, 1.0, 1.0)
    Ksvk = stiffness_matrix(model, ss, ss.zeros()).toarray()
    Klin = stiffness_matrix(lin, ss, ss.zeros()).toarray()
    assert np.abs(Ksvk - Klin).max() < 1e-13
    oracle = DenseStep(problem, model)
    assert np.abs(Ksvk - oracle.stiffness(ss.zeros())).max() < 1e-12


def test_tangent_consistency(tiny):
    problem, model = tiny
    ss = problem.sspace
    rng = np.random.default_rng(1)
    w = 0.02 * rng.standard_normal(ss.ndof)
    K = stiffness_matrix(model, ss, w)
    delta = rng.standard_normal(ss.ndof)
    errs = []
    for h in (1e-4, 5e-5):
        fd = (internal_force(model, ss, w + h * delta) - internal_force(model, ss, w)) / h
        errs.append(np.linalg.norm(fd - K @ delta))
    assert errs[1] < 0.7 * errs[0]


def test_tangent_symmetry(tiny):
    problem, model = tiny
    ss = problem.sspace
    rng = np.random.default_rng(2)
    w = 0.05 * rng.standard_normal(ss.ndof)
    A = solid_tangent(model, ss, problem.M_solid, w, dt=0.01).toarray()
    assert np.abs(A - A.T).max() < 1e-11


def test_newton_zero_data(tiny):
    problem, model = tiny
    ss = problem.sspace

    def residual(u):
        return solid_residual(model, ss, problem.interface, problem.M_solid, u, ss.zeros())

    def tangent(u):
        return stiffness_matrix(model, ss, u) + problem.M_solid

    u, info = newton_solve(residual, tangent, ss.zeros(), tol=1e-12)
    assert info["iterations"] == 0


def test_newton_linear_single_iteration(tiny):
    problem, _ = tiny
    lin = make_material(LIN, 1.0, 1.0)
    ss = problem.sspace
    rng = np.random.default_rng(3)
    load = 1e-3 * rng.standard_normal(ss.ndof)

    def residual(u):
        return (stiffness_matrix(lin, ss, u * 0) + problem.M_solid) @ u - load

    def tangent(u):
        return stiffness_matrix(lin, ss, u * 0) + problem.M_solid

    u, info = newton_solve(residual, tangent, rng.standard_normal(ss.ndof), tol=1e-10)
    assert info["iterations"] == 1


def test_newton_quadratic_convergence(annulus):
    problem, model = annulus
    ss = problem.sspace
    load = internal_force(model, ss, ss.interpolate(lambda x: 0.05 * x)) \
        + problem.M_solid @ ss.interpolate(lambda x: 0.05 * x)

    def residual(u):
        return internal_force(model, ss, u) + problem.M_solid @ u - load

    def tangent(u):
        return stiffness_matrix(model, ss, u) + problem.M_solid

    u, info = newton_solve(residual, tangent, ss.zeros(), tol=1e-12, maxit=30)
    rs = info["residuals"]
    # once in the quadratic basin, residuals contract superlinearly
    tail = [r for r in rs if 1e-12 < r < 1e-2]
    for r0, r1 in zip(tail, tail[1:]):
        assert r1 <= 20 * r0 * r0 / max(tail[0], 1e-30) or r1 < 1e-11


def test_newton_maxit_raises(tiny):
    problem, model = tiny
    ss = problem.sspace
    load = np.ones(ss.ndof)

    def residual(u):
        return internal_force(model, ss, u) + problem.M_solid @ u - load

    def tangent(u):
        return stiffness_matrix(model, ss, u) + problem.M_solid

    with pytest.raises(SolverError) as err:
        newton_solve(residual, tangent, ss.zeros(), tol=1e-14, maxit=1)
    assert err.value.history is not None and len(err.value.history) >= 1


def test_newmark_closure_exact():
    rng = np.random.default_rng(4)
    w0, wt0, wtt0 = rng.standard_normal((3, 7))
    dt = 0.01
    w1 = rng.standard_normal(7)
    wt1, wtt1 = newmark_update(w1, w0, wt0, wtt0, dt)
    beta, gam = NEWMARK_BETA, NEWMARK_GAMMA
    assert np.allclose(
        w1, w0 + dt * wt0 + dt * dt * ((1 - 2 * beta) / 2 * wtt0 + beta * wtt1), atol=1e-13
    )
    assert np.allclose(wt1, wt0 + dt * ((1 - gam) * wtt0 + gam * wtt1), atol=1e-13)


def test_undamped_energy_conservation(annulus):
    # free solid vibration at the lowest linear mode: the trapezoidal-rule
    # integrator keeps the quadratic energy to within 0.1% over 100 periods
    problem, _ = annulus
    lin = make_material(LIN, 1.0, 1.0)
    ss = problem.sspace
    M = problem.M_solid.tocsc()
    K = (stiffness_matrix(lin, ss, ss.zeros()) + problem.M_solid).tocsc()
    vals, vecs = spla.eigsh(K, k=1, M=M, sigma=0, which="LM")
    omega = np.sqrt(vals[0])
    period = 2 * np.pi / omega
    dt = period / 40
    w = 1e-4 * vecs[:, 0] / np.abs(vecs[:, 0]).max()
    wt = np.zeros_like(w)
    wtt = spla.spsolve(M, -(K @ w))
    beta, gam = NEWMARK_BETA, NEWMARK_GAMMA
    lhs = spla.factorized((M + beta * dt * dt * K).tocsc())

    def energy(w, wt):
        return 0.5 * (wt @ (M @ wt) + w @ (K @ w))

    E0 = energy(w, wt)
    nsteps = int(round(100 * period / dt))
    for _ in range(nsteps):
        pred_w = w + dt * wt + dt * dt * (0.5 - beta) * wtt
        pred_wt = wt + dt * (1 - gam) * wtt
        rhs = -(K @ pred_w)
        wtt_new = lhs(rhs)
        w = pred_w + beta * dt * dt * wtt_new
        wt = pred_wt + gam * dt * wtt_new
        wtt = wtt_new
    drift = abs(energy(w, wt) - E0) / E0
    assert drift <= 1e-3
