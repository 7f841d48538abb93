"""Stored-energy models: frozen values, finite-difference oracles,
multilinearity and the commutator remainders."""

import numpy as np
import pytest

from lagfsi.errors import ConfigError
from lagfsi.material import (
    GAUSS5_NODES, make_material, remainder_bracket, stress_rates,
)

SVK = "saint-venant-kirchhoff"
LIN = "linear-isotropic"


def test_energy_density_values():
    mdl = make_material(SVK, 1.0, 1.0)
    assert mdl.energy_density(np.eye(2)) == 0.0
    # diag(1.1, 1): E = diag(0.105, 0), W = 1.5 * 0.105^2
    F = np.diag([1.1, 1.0])
    assert mdl.energy_density(F) == pytest.approx(0.0165375, abs=1e-15)
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert abs(mdl.energy_density(R)) < 1e-15


def test_piola_stress_equilibrium_and_fd():
    rng = np.random.default_rng(0)
    for kind in (SVK, LIN):
        mdl = make_material(kind, 1.2, 0.7)
        for d in (2, 3):
            assert np.linalg.norm(mdl.piola_stress(np.eye(d))) <= 1e-12
            for _ in range(20):
                F = np.eye(d) + 0.1 * rng.standard_normal((d, d))
                G = rng.standard_normal((d, d))
                h = 1e-5
                fd = (mdl.energy_density(F + h * G) - mdl.energy_density(F - h * G)) / (2 * h)
                ex = np.sum(mdl.piola_stress(F) * G)
                assert abs(fd - ex) <= 1e-6 * max(1e-8, abs(ex))


def test_piola_stress_closed_form():
    mdl = make_material(SVK, 1.0, 1.0)
    F = np.diag([1.1, 1.0])
    E = 0.5 * (F.T @ F - np.eye(2))
    expect = F @ (np.trace(E) * np.eye(2) + 2 * E)
    assert np.allclose(mdl.piola_stress(F), expect, atol=1e-15)


def test_hessian_contraction_value():
    mdl = make_material(SVK, 1.0, 1.0)
    b = np.array([1.0, 0.0, 0.0])
    G = np.outer(b, b)
    val = np.einsum("iajb,ia,jb->", mdl.hessian(np.eye(3)), G, G)
    assert val == pytest.approx(3.0, abs=1e-14)  # lambda + 2 mu


def test_hessian_ellipticity_sampled():
    for kind in (SVK, LIN):
        mdl = make_material(kind, 1.0, 1.0)
        margin = mdl.ellipticity_margin(dim=3, nsamples=10000, rng=np.random.default_rng(5))
        assert margin >= mdl.mu - 1e-9


def test_hessian_major_symmetry():
    rng = np.random.default_rng(1)
    mdl = make_material(SVK, 1.3, 0.6)
    F = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    H = mdl.hessian(F)
    assert np.abs(H - np.transpose(H, (2, 3, 0, 1))).max() == 0.0


def test_higher_derivative_structure():
    rng = np.random.default_rng(2)
    mdl = make_material(SVK, 1.0, 1.0)
    F1 = np.eye(2) + 0.1 * rng.standard_normal((2, 2))
    F2 = np.eye(2) + 0.1 * rng.standard_normal((2, 2))
    assert np.abs(mdl.higher_derivative(F1, 5)).max() == 0.0
    assert np.allclose(mdl.higher_derivative(F1, 4), mdl.higher_derivative(F2, 4), atol=0)
    # order-3 contraction against finite differences of the hessian
    G = rng.standard_normal((2, 2))
    K = rng.standard_normal((2, 2))
    h = 1e-5
    fd = (mdl.d2_contract(F1 + h * K, G) - mdl.d2_contract(F1 - h * K, G)) / (2 * h)
    ex = np.einsum("iajbkg,jb,kg->ia", mdl.higher_derivative(F1, 3), G, K)
    assert np.abs(fd - ex).max() <= 1e-6
    with pytest.raises(ConfigError):
        mdl.higher_derivative(F1, 6)


def test_secant_tensor():
    rng = np.random.default_rng(3)
    mdl = make_material(SVK, 1.1, 0.9)
    assert np.allclose(mdl.secant_tensor(np.zeros((2, 2))), mdl.hessian(np.eye(2)), atol=1e-14)
    Dw = 0.2 * rng.standard_normal((2, 2))
    # independent s-integration: Simpson is exact for the quadratic integrand
    simpson = (
        mdl.hessian(np.eye(2))
        + 4 * mdl.hessian(np.eye(2) + 0.5 * Dw)
        + mdl.hessian(np.eye(2) + Dw)
    ) / 6
    assert np.abs(mdl.secant_tensor(Dw) - simpson).max() <= 1e-12


def test_secant_fundamental_theorem():
    # l_{Dw} N_w contracted with Dw reproduces <DW(I + Dw), Dw> exactly
    rng = np.random.default_rng(4)
    for kind in (SVK, LIN):
        mdl = make_material(kind, 1.0, 1.0)
        for d in (2, 3):
            Dw = 0.1 * rng.standard_normal((d, d))
            lhs = mdl.secant_form(Dw, Dw, Dw)
            rhs = np.sum(mdl.piola_stress(np.eye(d) + Dw) * Dw)
            assert lhs == pytest.approx(rhs, abs=1e-14)


def test_secant_energy_split():
    # for the linear model the secant form equals twice the stored energy;
    # for the quartic model the two differ at cubic order only
    rng = np.random.default_rng(5)
    Dw = rng.standard_normal((2, 2))
    lin = make_material(LIN, 1.0, 1.0)
    for s in (0.1, 0.05):
        q = lin.secant_form(s * Dw, s * Dw, s * Dw)
        e2 = 2 * (lin.energy_density(np.eye(2) + s * Dw) - lin.energy_density(np.eye(2)))
        assert q == pytest.approx(e2, rel=1e-12)
    svk = make_material(SVK, 1.0, 1.0)
    gaps = []
    for s in (0.1, 0.05):
        q = svk.secant_form(s * Dw, s * Dw, s * Dw)
        e2 = 2 * svk.energy_density(np.eye(2) + s * Dw)
        gaps.append(abs(q - e2))
    ratio = gaps[0] / gaps[1]
    assert 6.0 < ratio < 10.0  # cubic-order discrepancy halves thrice


def test_nprime_form_quadrature_oracle():
    rng = np.random.default_rng(6)
    mdl = make_material(SVK, 1.4, 0.8)
    Dw = 0.2 * rng.standard_normal((2, 2))
    A, B, C = (rng.standard_normal((2, 2)) for _ in range(3))
    s_dense = np.linspace(0, 1, 2001)
    vals = np.array([s * mdl.d3_form(np.eye(2) + s * Dw, A, B, C) for s in s_dense])
    dense = np.trapezoid(vals, s_dense)
    assert mdl.nprime_form(Dw, A, B, C) == pytest.approx(dense, rel=1e-6)


def test_traction():
    rng = np.random.default_rng(7)
    nu = np.array([0.6, 0.8])
    for kind in (SVK, LIN):
        mdl = make_material(kind, 1.0, 1.0)
        assert np.linalg.norm(mdl.traction(np.zeros((2, 2)), nu)) <= 1e-14
    lin0 = make_material(LIN, 0.0, 1.0)
    E = rng.standard_normal((2, 2))
    E = 0.5 * (E + E.T)
    assert np.allclose(lin0.traction(E, nu), 2 * 1.0 * E @ nu, atol=1e-14)
    svk = make_material(SVK, 1.0, 1.0)
    Dw = rng.standard_normal((2, 2))
    norms = [np.linalg.norm(svk.traction(s * Dw, nu)) / s for s in (1e-3, 1e-4, 1e-5)]
    assert max(norms) < 10 * np.linalg.norm(Dw) * 10  # O(|Dw|) scaling


def test_linearized_traction():
    rng = np.random.default_rng(8)
    mdl = make_material(SVK, 1.0, 1.0)
    nu = np.array([0.0, 1.0])
    assert np.linalg.norm(mdl.linearized_traction(0.1 * rng.standard_normal((2, 2)),
                                                  np.zeros((2, 2)), nu)) == 0.0
    # at zero base it reduces to the hessian-at-identity contraction
    Dphi = rng.standard_normal((2, 2))
    got = mdl.linearized_traction(np.zeros((2, 2)), Dphi, nu)
    H = mdl.hessian(np.eye(2))
    for X in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
        expect = np.einsum("iajb,ia,jb->", H, Dphi, np.outer(X, nu))
        assert got @ X == pytest.approx(expect, abs=1e-14)
    # directional-derivative consistency, first order in h
    Dw = 0.05 * rng.standard_normal((2, 2))
    errs = []
    for h in (1e-3, 5e-4):
        fd = (mdl.traction(Dw + h * Dphi, nu) - mdl.traction(Dw, nu)) / h
        errs.append(np.linalg.norm(fd - mdl.linearized_traction(Dw, Dphi, nu)))
    assert errs[1] < 0.7 * errs[0]


def _path(rng, d):
    A = 0.05 * rng.standard_normal((d, d))
    B = 0.05 * rng.standard_normal((d, d))
    C = 0.05 * rng.standard_normal((d, d))

    def Dw(t):
        return A * np.sin(t) + B * np.cos(2 * t) + C * t * t / 2

    def rates(t):
        return [
            A * np.cos(t) - 2 * B * np.sin(2 * t) + C * t,
            -A * np.sin(t) - 4 * B * np.cos(2 * t) + C,
            -A * np.cos(t) + 8 * B * np.sin(2 * t),
            A * np.sin(t) + 16 * B * np.cos(2 * t),
        ]

    return Dw, rates


def test_stress_rates_zero_and_fd_path():
    rng = np.random.default_rng(9)
    mdl = make_material(SVK, 1.0, 1.0)
    d = 2
    z = np.zeros((d, d))
    bundle = stress_rates(mdl, 0.1 * rng.standard_normal((d, d)), [z, z, z, z])
    for M in (bundle.Cdot, bundle.Cddot, bundle.C3, bundle.C4):
        assert np.abs(M).max() == 0.0

    Dw, rates = _path(rng, d)
    t0 = 0.3
    I = np.eye(d)

    def C(t):
        return mdl.piola_stress(Dw(t) + I)

    bundle = stress_rates(mdl, Dw(t0), rates(t0))
    errs = {}
    for h in (0.05, 0.025):
        fd1 = (C(t0 + h) - C(t0 - h)) / (2 * h)
        fd2 = (C(t0 + h) - 2 * C(t0) + C(t0 - h)) / h**2
        fd3 = (C(t0 + 2 * h) - 2 * C(t0 + h) + 2 * C(t0 - h) - C(t0 - 2 * h)) / (2 * h**3)
        fd4 = (C(t0 + 2 * h) - 4 * C(t0 + h) + 6 * C(t0) - 4 * C(t0 - h) + C(t0 - 2 * h)) / h**4
        errs[h] = [
            np.abs(fd - ex).max()
            for fd, ex in zip((fd1, fd2, fd3, fd4),
                              (bundle.Cdot, bundle.Cddot, bundle.C3, bundle.C4))
        ]
    for j in range(4):
        order = np.log2(errs[0.05][j] / errs[0.025][j])
        assert order > 1.8, (j, order)


def test_stress_rates_fourth_order_coefficients():
    # Dw_t = Dw_tt = G, higher rates zero: the fourth rate collapses to
    # 3 l_G l_G D3W + 6 l_G l_G l_G D4W; checked against the same path oracle
    rng = np.random.default_rng(10)
    mdl = make_material(SVK, 1.0, 1.0)
    d = 2
    G = 0.05 * rng.standard_normal((d, d))
    Dw0 = 0.05 * rng.standard_normal((d, d))
    z = np.zeros((d, d))
    bundle = stress_rates(mdl, Dw0, [G, G, z, z])
    direct = 3 * mdl.d3_contract(Dw0 + np.eye(d), G, G) + 6 * mdl.d4_contract(G, G, G)
    assert np.allclose(bundle.C4, direct, atol=1e-14)

    def Dw(t):
        return Dw0 + t * G + t * t * G / 2

    def C(t):
        return mdl.piola_stress(Dw(t) + np.eye(d))

    errs = []
    for h in (0.04, 0.02):
        fd4 = (C(2 * h) - 4 * C(h) + 6 * C(0) - 4 * C(-h) + C(2 * -h)) / h**4
        errs.append(np.abs(fd4 - bundle.C4).max())
    assert np.log2(errs[0] / errs[1]) > 1.5


def test_stress_rates_multilinearity():
    rng = np.random.default_rng(11)
    mdl = make_material(SVK, 1.0, 1.0)
    d = 2
    Dw = 0.1 * rng.standard_normal((d, d))
    G = rng.standard_normal((d, d))
    z = np.zeros((d, d))
    # doubling Dw_t doubles the first rate
    b1 = stress_rates(mdl, Dw, [G])
    b2 = stress_rates(mdl, Dw, [2 * G])
    assert np.allclose(b2.Cdot, 2 * b1.Cdot, atol=1e-13)
    # third rate with only Dw_ttt: linear in it
    b1 = stress_rates(mdl, Dw, [z, z, G])
    b2 = stress_rates(mdl, Dw, [z, z, 3 * G])
    assert np.allclose(b2.C3, 3 * b1.C3, atol=1e-13)
    # D3W double term: quadratic under scaling of Dw_t with Dw_tt = 0
    F = Dw + np.eye(d)
    for s in (1.0, 2.0):
        term = stress_rates(mdl, Dw, [s * G, z]).Cddot
        assert np.allclose(term, s * s * mdl.d3_contract(F, G, G), atol=1e-12)


def test_stress_rates_arity():
    mdl = make_material(SVK, 1.0, 1.0)
    with pytest.raises(ConfigError):
        stress_rates(mdl, np.zeros((2, 2)), [])


def test_remainder_bracket():
    rng = np.random.default_rng(12)
    d = 2
    Dw = 0.1 * rng.standard_normal((d, d))
    G1 = rng.standard_normal((d, d))
    G2 = rng.standard_normal((d, d))
    lin = make_material(LIN, 1.0, 1.0)
    assert np.abs(remainder_bracket(lin, Dw, [G1, G2], 1)).max() == 0.0
    svk = make_material(SVK, 1.0, 1.0)
    z = np.zeros((d, d))
    assert np.abs(remainder_bracket(svk, Dw, [z, z], 1)).max() == 0.0
    # term-by-term: the bracket is the second stress rate minus its
    # frozen-coefficient part, assembled here from the full tensors
    F = Dw + np.eye(d)
    D3 = svk.higher_derivative(F, 3)
    expect = np.einsum("iajbkg,jb,kg->ia", D3, G1, G1)
    got = remainder_bracket(svk, Dw, [G1, G2], 1)
    assert np.allclose(got, expect, atol=1e-13)
    with pytest.raises(ConfigError):
        remainder_bracket(svk, Dw, [G1], 1)
    with pytest.raises(ConfigError):
        remainder_bracket(svk, Dw, [G1, G2], 3)


def test_ellipticity_persistence():
    # within the configured smallness radius the sampled margin keeps
    # at least half the identity margin
    rng = np.random.default_rng(13)
    mdl = make_material(SVK, 1.0, 1.0, gamma0=0.1)
    for _ in range(20):
        Dw = rng.standard_normal((2, 2))
        Dw *= mdl.gamma0 / max(1e-12, np.abs(Dw).max())
        margin = mdl.ellipticity_margin(F=np.eye(2) + Dw, dim=2, nsamples=2000,
                                        rng=rng)
        assert margin >= mdl.mu / 2


def test_derivative_chain_report():
    for kind in (SVK, LIN):
        errs = make_material(kind, 1.0, 1.0).derivative_chain_errors(dim=2)
        assert max(errs) <= 1e-6


def test_model_validation():
    with pytest.raises(ConfigError):
        make_material("rubber")
    with pytest.raises(ConfigError):
        make_material(SVK, 1.0, -1.0)


def test_gauss5_nodes_cover_unit_interval():
    assert GAUSS5_NODES.min() > 0 and GAUSS5_NODES.max() < 1
