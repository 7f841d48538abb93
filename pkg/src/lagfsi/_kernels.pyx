# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly kernels; semantics mirror lagfsi._kernels_py exactly.

All loops run over (cells, quadrature points) with small fixed-size inner
dimensions (d = 2 or 3), which is where a pure-numpy assembly spends most
of its time on desk-scale meshes.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def inv_det(cnp.ndarray F_in):
    shape = F_in.shape
    d = F_in.shape[F_in.ndim - 1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] F = np.ascontiguousarray(
        F_in, dtype=np.float64).reshape(-1, d, d)
    cdef Py_ssize_t n = F.shape[0], k
    cdef cnp.ndarray[cnp.float64_t, ndim=3] inv = np.empty_like(F)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] det = np.empty(n)
    cdef double a, b, c, e, f, g, h, i, j, dd
    if d == 2:
        for k in range(n):
            a = F[k, 0, 0]; b = F[k, 0, 1]
            c = F[k, 1, 0]; e = F[k, 1, 1]
            dd = a * e - b * c
            det[k] = dd
            inv[k, 0, 0] = e / dd
            inv[k, 0, 1] = -b / dd
            inv[k, 1, 0] = -c / dd
            inv[k, 1, 1] = a / dd
    else:
        for k in range(n):
            a = F[k, 0, 0]; b = F[k, 0, 1]; c = F[k, 0, 2]
            e = F[k, 1, 0]; f = F[k, 1, 1]; g = F[k, 1, 2]
            h = F[k, 2, 0]; i = F[k, 2, 1]; j = F[k, 2, 2]
            dd = a * (f * j - g * i) - b * (e * j - g * h) + c * (e * i - f * h)
            det[k] = dd
            inv[k, 0, 0] = (f * j - g * i) / dd
            inv[k, 0, 1] = (c * i - b * j) / dd
            inv[k, 0, 2] = (b * g - c * f) / dd
            inv[k, 1, 0] = (g * h - e * j) / dd
            inv[k, 1, 1] = (a * j - c * h) / dd
            inv[k, 1, 2] = (c * e - a * g) / dd
            inv[k, 2, 0] = (e * i - f * h) / dd
            inv[k, 2, 1] = (b * h - a * i) / dd
            inv[k, 2, 2] = (a * f - b * e) / dd
    out_shape = tuple(F_in.shape[m] for m in range(F_in.ndim))
    return inv.reshape(out_shape), det.reshape(out_shape[:-2])


cdef void _pk1_point(double* F, double* P, double lam, double mu, int kind, int d) noexcept nogil:
    cdef double E[9]
    cdef double S[9]
    cdef int a, b, c
    cdef double tr
    if kind == 1:
        for a in range(d):
            for b in range(d):
                E[a * d + b] = 0.0
                for c in range(d):
                    E[a * d + b] += F[c * d + a] * F[c * d + b]
                E[a * d + b] = 0.5 * (E[a * d + b] - (1.0 if a == b else 0.0))
    else:
        for a in range(d):
            for b in range(d):
                E[a * d + b] = 0.5 * (F[a * d + b] + F[b * d + a]) - (1.0 if a == b else 0.0)
    tr = 0.0
    for a in range(d):
        tr += E[a * d + a]
    for a in range(d):
        for b in range(d):
            S[a * d + b] = 2.0 * mu * E[a * d + b]
            if a == b:
                S[a * d + b] += lam * tr
    if kind == 1:
        for a in range(d):
            for b in range(d):
                P[a * d + b] = 0.0
                for c in range(d):
                    P[a * d + b] += F[a * d + c] * S[c * d + b]
    else:
        for a in range(d):
            for b in range(d):
                P[a * d + b] = S[a * d + b]


def pk1(cnp.ndarray F_in, double lam, double mu, int kind):
    d = F_in.shape[F_in.ndim - 1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] F = np.ascontiguousarray(
        F_in, dtype=np.float64).reshape(-1, d, d)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] P = np.empty_like(F)
    cdef Py_ssize_t n = F.shape[0], k
    cdef int dd = d
    for k in range(n):
        _pk1_point(&F[k, 0, 0], &P[k, 0, 0], lam, mu, kind, dd)
    return P.reshape(tuple(F_in.shape[m] for m in range(F_in.ndim)))


def elem_residual(cnp.ndarray P_in, cnp.ndarray G_in, cnp.ndarray w_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=4] P = np.ascontiguousarray(P_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] G = np.ascontiguousarray(G_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t nc = G.shape[0], nq = G.shape[1], na = G.shape[2], d = G.shape[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] R = np.zeros((nc, na, d))
    cdef Py_ssize_t c, q, a, i, b
    cdef double wq, acc
    for c in range(nc):
        for q in range(nq):
            wq = w[c, q]
            for a in range(na):
                for i in range(d):
                    acc = 0.0
                    for b in range(d):
                        acc += P[c, q, i, b] * G[c, q, a, b]
                    R[c, a, i] += wq * acc
    return R


def elem_tangent(cnp.ndarray F_in, cnp.ndarray G_in, cnp.ndarray w_in,
                 double lam, double mu, int kind):
    cdef cnp.ndarray[cnp.float64_t, ndim=4] F = np.ascontiguousarray(F_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] G = np.ascontiguousarray(G_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t nc = G.shape[0], nq = G.shape[1], na = G.shape[2], d = G.shape[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=5] K = np.zeros((nc, na, d, na, d))
    cdef Py_ssize_t c, q, a, b, i, j, m
    cdef double wq, gg, gsg, tr
    cdef double E[9]
    cdef double S[9]
    cdef double FG[60]   # (na, d) products F G_a, na <= 20
    cdef double FFt[9]
    for c in range(nc):
        for q in range(nq):
            wq = w[c, q]
            if kind == 1:
                for i in range(d):
                    for j in range(d):
                        E[i * d + j] = 0.0
                        for m in range(d):
                            E[i * d + j] += F[c, q, m, i] * F[c, q, m, j]
                        E[i * d + j] = 0.5 * (E[i * d + j] - (1.0 if i == j else 0.0))
                tr = 0.0
                for i in range(d):
                    tr += E[i * d + i]
                for i in range(d):
                    for j in range(d):
                        S[i * d + j] = 2.0 * mu * E[i * d + j]
                        if i == j:
                            S[i * d + j] += lam * tr
                for i in range(d):
                    for j in range(d):
                        FFt[i * d + j] = 0.0
                        for m in range(d):
                            FFt[i * d + j] += F[c, q, i, m] * F[c, q, j, m]
                for a in range(na):
                    for i in range(d):
                        FG[a * d + i] = 0.0
                        for m in range(d):
                            FG[a * d + i] += F[c, q, i, m] * G[c, q, a, m]
                for a in range(na):
                    for b in range(na):
                        gg = 0.0
                        for m in range(d):
                            gg += G[c, q, a, m] * G[c, q, b, m]
                        gsg = 0.0
                        for i in range(d):
                            for j in range(d):
                                gsg += G[c, q, a, i] * S[i * d + j] * G[c, q, b, j]
                        for i in range(d):
                            for j in range(d):
                                K[c, a, i, b, j] += wq * (
                                    lam * FG[a * d + i] * FG[b * d + j]
                                    + mu * FFt[i * d + j] * gg
                                    + mu * FG[b * d + i] * FG[a * d + j]
                                )
                            K[c, a, i, b, i] += wq * gsg
            else:
                for a in range(na):
                    for b in range(na):
                        gg = 0.0
                        for m in range(d):
                            gg += G[c, q, a, m] * G[c, q, b, m]
                        for i in range(d):
                            for j in range(d):
                                K[c, a, i, b, j] += wq * (
                                    lam * G[c, q, a, i] * G[c, q, b, j]
                                    + mu * G[c, q, a, j] * G[c, q, b, i]
                                )
                            K[c, a, i, b, i] += wq * mu * gg
    return K


def visc_elements(cnp.ndarray aaT_in, cnp.ndarray G_in, cnp.ndarray w_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=4] aaT = np.ascontiguousarray(aaT_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] G = np.ascontiguousarray(G_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t nc = G.shape[0], nq = G.shape[1], na = G.shape[2], d = G.shape[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] K = np.zeros((nc, na, na))
    cdef Py_ssize_t c, q, a, b, jj, kk
    cdef double wq, acc
    for c in range(nc):
        for q in range(nq):
            wq = w[c, q]
            for a in range(na):
                for b in range(na):
                    acc = 0.0
                    for jj in range(d):
                        for kk in range(d):
                            acc += aaT[c, q, jj, kk] * G[c, q, a, jj] * G[c, q, b, kk]
                    K[c, a, b] += wq * acc
    return K


def div_elements(cnp.ndarray a_in, cnp.ndarray G_in, cnp.ndarray valp_in, cnp.ndarray w_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=4] A = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] G = np.ascontiguousarray(G_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] valp = np.ascontiguousarray(valp_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t nc = G.shape[0], nq = G.shape[1], na = G.shape[2], d = G.shape[3]
    cdef Py_ssize_t npb = valp.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] B = np.zeros((nc, npb, na, d))
    cdef Py_ssize_t c, q, p, a, i, k
    cdef double wq, acc
    for c in range(nc):
        for q in range(nq):
            wq = w[c, q]
            for p in range(npb):
                for a in range(na):
                    for i in range(d):
                        acc = 0.0
                        for k in range(d):
                            acc += A[c, q, k, i] * G[c, q, a, k]
                        B[c, p, a, i] += wq * valp[q, p] * acc
    return B
