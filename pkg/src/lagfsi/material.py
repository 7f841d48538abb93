"""Hyperelastic stored-energy models and their derivative calculus.

Two models ship:

* ``saint-venant-kirchhoff``: W(F) = lam/2 tr(E)^2 + mu |E|^2 with the
  Green strain E = (F^T F - I)/2.  Quartic in F, so the fifth derivative
  vanishes and every lower derivative has a closed form.
* ``linear-isotropic``: same quadratic form in the symmetrized displacement
  gradient sym(F - I); all derivatives above the second vanish.

Both satisfy the equilibrium condition DW(I) = 0 and strong ellipticity
at the identity with margin mu (checked at construction).

Derivatives are exposed two ways: full tensors (``hessian``,
``higher_derivative``) for the diagnostics that need them, and contracted
matrix/scalar forms (``d2_contract`` ...) used by assembly and the stress
rates.  Contraction slot order never matters: all derivative tensors of a
scalar function are fully symmetric in their matrix slots.
"""

import numpy as np

from .errors import ConfigError

GAUSS5_NODES, GAUSS5_WEIGHTS = np.polynomial.legendre.leggauss(5)
GAUSS5_NODES = (GAUSS5_NODES + 1) / 2
GAUSS5_WEIGHTS = GAUSS5_WEIGHTS / 2

KINDS = {"linear-isotropic": 0, "saint-venant-kirchhoff": 1}


def isotropic_tensor(dim, lam, mu):
    """lam I(x)I + 2 mu sym-projector, as a (d,d,d,d) array with slot pairs
    (i,a),(j,b)."""
    I = np.eye(dim)
    C = lam * np.einsum("ia,jb->iajb", I, I)
    C += mu * (np.einsum("ij,ab->iajb", I, I) + np.einsum("ib,aj->iajb", I, I))
    return C


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _tr(M):
    return np.trace(M, axis1=-2, axis2=-1)


class StressRateBundle:
    """Time derivatives of the first Piola stress along a deformation path."""

    def __init__(self, C, Cdot=None, Cddot=None, C3=None, C4=None):
        self.C = C
        self.Cdot = Cdot
        self.Cddot = Cddot
        self.C3 = C3
        self.C4 = C4


class MaterialModel:
    """Stored-energy function with derivative evaluators up to order 5.

    Parameters
    ----------
    kind : str
        'saint-venant-kirchhoff' or 'linear-isotropic'.
    lam, mu : float
        Lame parameters; lam >= 0 and mu > 0 keep the identity elliptic.
    gamma0 : float
        Deformation-smallness radius within which ellipticity persistence
        is monitored.
    """

    def __init__(self, kind, lam=1.0, mu=1.0, gamma0=0.1):
        if kind not in KINDS:
            raise ConfigError(f"unknown material kind {kind!r}")
        if mu <= 0 or lam < 0:
            raise ConfigError("material requires mu > 0 and lambda >= 0")
        self.kind = kind
        self._svk = KINDS[kind]
        self.lam = float(lam)
        self.mu = float(mu)
        self.gamma0 = float(gamma0)
        # equilibrium at the identity, checked numerically
        for d in (2, 3):
            res = np.linalg.norm(self.piola_stress(np.eye(d)))
            if res > 1e-12:
                raise ConfigError(f"model violates DW(I)=0, residual {res}")

    # -- scalar and first derivative -------------------------------------------

    def _cmul(self, A):
        """Apply the isotropic tensor: lam tr(A) I + 2 mu sym(A)."""
        d = A.shape[-1]
        I = np.eye(d)
        return self.lam * _tr(A)[..., None, None] * I + 2 * self.mu * _sym(A)

    def _strain(self, F):
        d = F.shape[-1]
        I = np.eye(d)
        if self._svk:
            return 0.5 * (np.einsum("...ai,...aj->...ij", F, F) - I)
        return _sym(F - I)

    def energy_density(self, F):
        F = np.asarray(F, dtype=float)
        E = self._strain(F)
        return 0.5 * self.lam * _tr(E) ** 2 + self.mu * np.einsum("...ij,...ij->...", E, E)

    def piola_stress(self, F):
        """DW(F); equals F S(F) for the quadratic-strain model."""
        F = np.asarray(F, dtype=float)
        S = self._cmul(self._strain(F))
        if self._svk:
            return np.einsum("...ia,...ab->...ib", F, S)
        return S

    def second_pk(self, F):
        return self._cmul(self._strain(F))

    # -- contracted higher derivatives ------------------------------------------

    def d2_contract(self, F, G):
        """Matrix l_G D^2W(F)."""
        F = np.asarray(F, dtype=float)
        G = np.asarray(G, dtype=float)
        if not self._svk:
            return self._cmul(G)
        S = self.second_pk(F)
        FtG = np.einsum("...ai,...aj->...ij", F, G)
        return np.einsum("...ia,...ab->...ib", F, self._cmul(FtG)) + np.einsum(
            "...ia,...ab->...ib", G, S
        )

    def d3_contract(self, F, G, H):
        """Matrix l_H l_G D^3W(F)."""
        if not self._svk:
            return np.zeros(np.broadcast(np.asarray(G), np.asarray(H)).shape)
        F, G, H = (np.asarray(M, dtype=float) for M in (F, G, H))

        def m(A, B):
            return np.einsum("...ai,...aj->...ij", A, B)

        return (
            np.einsum("...ia,...ab->...ib", H, self._cmul(m(F, G)))
            + np.einsum("...ia,...ab->...ib", F, self._cmul(m(H, G)))
            + np.einsum("...ia,...ab->...ib", G, self._cmul(m(F, H)))
        )

    def d4_contract(self, G, H, K):
        """Matrix l_K l_H l_G D^4W (independent of F)."""
        if not self._svk:
            return np.zeros(np.broadcast(np.asarray(G), np.asarray(H)).shape)
        G, H, K = (np.asarray(M, dtype=float) for M in (G, H, K))

        def m(A, B):
            return np.einsum("...ai,...aj->...ij", A, B)

        return (
            np.einsum("...ia,...ab->...ib", H, self._cmul(m(K, G)))
            + np.einsum("...ia,...ab->...ib", K, self._cmul(m(H, G)))
            + np.einsum("...ia,...ab->...ib", G, self._cmul(m(K, H)))
        )

    def d5_contract(self, G, H, K, L):
        return np.zeros(np.asarray(G, dtype=float).shape)

    def d2_form(self, F, G, H):
        """Scalar D^2W(F)(G, H)."""
        return np.einsum("...ib,...ib->...", self.d2_contract(F, G), np.asarray(H, dtype=float))

    def d3_form(self, F, A, B, C):
        """Scalar D^3W(F)(A, B, C)."""
        return np.einsum("...ib,...ib->...", self.d3_contract(F, A, B), np.asarray(C, dtype=float))

    # -- full tensors ------------------------------------------------------------

    def hessian(self, F):
        """Full D^2W(F) with slot pairs (i,a),(j,b); major-symmetric."""
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        C = isotropic_tensor(d, self.lam, self.mu)
        if not self._svk:
            shape = F.shape[:-2] + (d, d, d, d)
            return np.broadcast_to(C, shape).copy()
        S = self.second_pk(F)
        I = np.eye(d)
        out = np.einsum("...iA,AaBb,...jB->...iajb", F, C, F)
        out += np.einsum("ij,...ab->...iajb", I, S)
        # exact major symmetry (the einsum is symmetric only to roundoff)
        nb = out.ndim - 4
        swap = tuple(range(nb)) + (nb + 2, nb + 3, nb, nb + 1)
        return 0.5 * (out + np.transpose(out, swap))

    def higher_derivative(self, F, order):
        """Full D^kW(F) for k in {3, 4, 5}."""
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        if order not in (3, 4, 5):
            raise ConfigError(f"unsupported derivative order {order}")
        shape = F.shape[:-2] + (d, d) * order
        if not self._svk or order == 5:
            return np.zeros(shape)
        C = isotropic_tensor(d, self.lam, self.mu)
        I = np.eye(d)
        if order == 3:
            out = np.einsum("ik,gaBb,...jB->...iajbkg", I, C, F)
            out += np.einsum("jk,AagB,...iA->...iajBkg", I, C, F)
            out += np.einsum("ij,bagD,...kD->...iajbkg", I, C, F)
            return out
        out = np.einsum("ik,gadb,jl->iajbkgld", I, C, I)
        out += np.einsum("jk,dagb,il->iajbkgld", I, C, I)
        out += np.einsum("ij,bagd,kl->iajbkgld", I, C, I)
        return np.broadcast_to(out, shape).copy()

    # -- secant (averaged Hessian) forms ----------------------------------------

    def secant_tensor(self, Dw):
        """N_w = int_0^1 D^2W(I + s Dw) ds by 5-point Gauss (exact here)."""
        Dw = np.asarray(Dw, dtype=float)
        d = Dw.shape[-1]
        I = np.eye(d)
        out = 0.0
        for s, w in zip(GAUSS5_NODES, GAUSS5_WEIGHTS):
            out = out + w * self.hessian(I + s * Dw)
        return out

    def secant_form(self, Dw, G, H):
        """int_0^1 D^2W(I + s Dw)(G, H) ds."""
        Dw = np.asarray(Dw, dtype=float)
        d = Dw.shape[-1]
        I = np.eye(d)
        out = 0.0
        for s, w in zip(GAUSS5_NODES, GAUSS5_WEIGHTS):
            out = out + w * self.d2_form(I + s * Dw, G, H)
        return out

    def secant_contract(self, Dw, G):
        """Matrix l_G N_w; reproduces DW(I + Dw) at G = Dw."""
        Dw = np.asarray(Dw, dtype=float)
        d = Dw.shape[-1]
        I = np.eye(d)
        out = 0.0
        for s, w in zip(GAUSS5_NODES, GAUSS5_WEIGHTS):
            out = out + w * self.d2_contract(I + s * Dw, G)
        return out

    def nprime_form(self, Dw, A, B, C):
        """s-weighted secant rate: int_0^1 s D^3W(I + s Dw)(A, B, C) ds."""
        if not self._svk:
            return np.zeros(np.asarray(A, dtype=float).shape[:-2])
        Dw = np.asarray(Dw, dtype=float)
        d = Dw.shape[-1]
        I = np.eye(d)
        out = 0.0
        for s, w in zip(GAUSS5_NODES, GAUSS5_WEIGHTS):
            out = out + w * s * self.d3_form(I + s * Dw, A, B, C)
        return out

    def nprime_contract(self, Dw, G, H):
        """Matrix-valued s-weighted secant rate int_0^1 s l_H l_G D^3W(I + s Dw) ds."""
        if not self._svk:
            return np.zeros(np.asarray(G, dtype=float).shape)
        Dw = np.asarray(Dw, dtype=float)
        d = Dw.shape[-1]
        I = np.eye(d)
        out = 0.0
        for s, w in zip(GAUSS5_NODES, GAUSS5_WEIGHTS):
            out = out + w * s * self.d3_contract(I + s * Dw, G, H)
        return out

    # -- tractions ---------------------------------------------------------------

    def traction(self, Dw, nu):
        """Interface traction DW(Dw + I) nu."""
        Dw = np.asarray(Dw, dtype=float)
        d = Dw.shape[-1]
        P = self.piola_stress(Dw + np.eye(d))
        return np.einsum("...ia,...a->...i", P, np.asarray(nu, dtype=float))

    def linearized_traction(self, Dw_base, Dphi, nu):
        """(l_{Dphi} D^2W(Dw_base + I)) nu."""
        Dw_base = np.asarray(Dw_base, dtype=float)
        d = Dw_base.shape[-1]
        M = self.d2_contract(Dw_base + np.eye(d), Dphi)
        return np.einsum("...ia,...a->...i", M, np.asarray(nu, dtype=float))

    # -- hypothesis checks ---------------------------------------------------------

    def h1_residual(self, dim=3):
        return float(np.linalg.norm(self.piola_stress(np.eye(dim))))

    def ellipticity_margin(self, F=None, dim=3, nsamples=10000, rng=None):
        """Sampled min of D^2W(F)(b1 x b2, b1 x b2) over random unit pairs."""
        rng = rng or np.random.default_rng(0)
        if F is None:
            F = np.eye(dim)
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        b1 = rng.standard_normal((nsamples, d))
        b2 = rng.standard_normal((nsamples, d))
        b1 /= np.linalg.norm(b1, axis=1, keepdims=True)
        b2 /= np.linalg.norm(b2, axis=1, keepdims=True)
        G = np.einsum("ni,nj->nij", b1, b2)
        vals = self.d2_form(F, G, G)
        return float(vals.min())

    def derivative_chain_errors(self, dim=2, n=100, step=1e-5, seed=1234):
        """Max relative error of each D^kW against central differences of
        D^{k-1}W along random directions near the identity."""
        rng = np.random.default_rng(seed)
        I = np.eye(dim)
        errs = np.zeros(4)
        for _ in range(n):
            F = I + 0.05 * rng.standard_normal((dim, dim))
            G = rng.standard_normal((dim, dim))
            G /= np.linalg.norm(G)
            fd = (self.energy_density(F + step * G) - self.energy_density(F - step * G)) / (2 * step)
            ex = np.einsum("ia,ia->", self.piola_stress(F), G)
            errs[0] = max(errs[0], abs(fd - ex) / max(1e-30, abs(ex) + 1e-12))
            fd = (self.piola_stress(F + step * G) - self.piola_stress(F - step * G)) / (2 * step)
            ex = self.d2_contract(F, G)
            errs[1] = max(errs[1], _relerr(fd, ex))
            fd = (self.d2_contract(F + step * G, G) - self.d2_contract(F - step * G, G)) / (2 * step)
            ex = self.d3_contract(F, G, G)
            errs[2] = max(errs[2], _relerr(fd, ex))
            fd = (self.d3_contract(F + step * G, G, G) - self.d3_contract(F - step * G, G, G)) / (2 * step)
            ex = self.d4_contract(G, G, G)
            errs[3] = max(errs[3], _relerr(fd, ex))
        return errs


def _relerr(a, b):
    scale = max(np.linalg.norm(b), 1e-10)
    return float(np.linalg.norm(a - b) / scale)


def make_material(kind, lam=1.0, mu=1.0, gamma0=0.1):
    return MaterialModel(kind, lam, mu, gamma0)


def stress_rates(model, Dw, rates):
    """Time derivatives of C(t) = DW(Dw + I) along a deformation path.

    `rates` lists the gradients of the time derivatives of the displacement,
    [Dw_t, Dw_tt, ...]; as many orders are produced as supplied (max 4).
    """
    Dw = np.asarray(Dw, dtype=float)
    d = Dw.shape[-1]
    F = Dw + np.eye(d)
    n = len(rates)
    if n < 1:
        raise ConfigError("stress_rates needs at least the first rate Dw_t")
    G = [np.asarray(r, dtype=float) for r in rates]
    out = StressRateBundle(model.piola_stress(F))
    out.Cdot = model.d2_contract(F, G[0])
    if n >= 2:
        out.Cddot = model.d2_contract(F, G[1]) + model.d3_contract(F, G[0], G[0])
    if n >= 3:
        out.C3 = (
            model.d2_contract(F, G[2])
            + 3 * model.d3_contract(F, G[0], G[1])
            + model.d4_contract(G[0], G[0], G[0])
        )
    if n >= 4:
        out.C4 = (
            model.d2_contract(F, G[3])
            + 4 * model.d3_contract(F, G[0], G[2])
            + 3 * model.d3_contract(F, G[1], G[1])
            + 6 * model.d4_contract(G[0], G[0], G[1])
            + model.d5_contract(G[0], G[0], G[0], G[0])
        )
    return out


def remainder_bracket(model, Dw, rates, j):
    """Pointwise matrix C^(j+1) - l_{Dw^(j+1)} D^2W(Dw + I) for j in {1, 2}.

    This is the commutator between time-differentiating the nonlinear
    stress and the frozen-coefficient linearized operator; only derivative
    terms of order >= 3 survive, so it vanishes identically for the
    linear-isotropic model.
    """
    if j not in (1, 2):
        raise ConfigError("remainder defined for j in {1, 2}")
    if len(rates) < j + 1:
        raise ConfigError(f"remainder at j={j} needs {j + 1} rate fields")
    Dw = np.asarray(Dw, dtype=float)
    d = Dw.shape[-1]
    F = Dw + np.eye(d)
    G = [np.asarray(r, dtype=float) for r in rates]
    if j == 1:
        return model.d3_contract(F, G[0], G[0])
    return 3 * model.d3_contract(F, G[0], G[1]) + model.d4_contract(G[0], G[0], G[0])
