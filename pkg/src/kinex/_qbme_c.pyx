# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluation of the discrete mass-exchange collision operator.

Same contract as :func:`kinex._qbme_py.qbme_kernel`; see that module for the
event definition.  Loops run pair by pair so no per-chunk temporaries are
allocated.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, fabs, pow, rint

cnp.import_array()


cdef inline int _stencil(double* v, int n, int Nv, double vmin, double h,
                         long* idx, double* w) noexcept nogil:
    cdef double t, s
    cdef long k0[3]
    cdef double w1[3][3]
    cdef int d, a, b, c, q
    for d in range(n):
        t = (v[d] - vmin) / h
        k0[d] = <long> rint(t)
        if k0[d] < 1 or k0[d] > Nv - 2:
            return 0
        s = t - k0[d]
        w1[d][0] = 0.5 * s * (s - 1.0)
        w1[d][1] = 1.0 - s * s
        w1[d][2] = 0.5 * s * (s + 1.0)
    if n == 1:
        for a in range(3):
            idx[a] = k0[0] - 1 + a
            w[a] = w1[0][a]
        return 3
    if n == 2:
        q = 0
        for a in range(3):
            for b in range(3):
                idx[q] = (k0[0] - 1 + a) * Nv + (k0[1] - 1 + b)
                w[q] = w1[0][a] * w1[1][b]
                q += 1
        return 9
    q = 0
    for a in range(3):
        for b in range(3):
            for c in range(3):
                idx[q] = ((k0[0] - 1 + a) * Nv + (k0[1] - 1 + b)) * Nv + (k0[2] - 1 + c)
                w[q] = w1[0][a] * w1[1][b] * w1[2][c]
                q += 1
    return 27


def qbme_kernel(double[:, ::1] F, double[:, ::1] logF, double[::1] masses, int n, int Nv,
                double vmin, double h, double[:, ::1] quad, double[:, ::1] tasks,
                double amp, double expo):
    cdef Py_ssize_t M = F.shape[0]
    cdef Py_ssize_t Nn = F.shape[1]
    cdef Py_ssize_t K = quad.shape[0]
    cdef Py_ssize_t T = tasks.shape[0]
    Qarr = np.zeros((M, Nn))
    Garr = np.zeros((M, Nn))
    cdef double[:, ::1] Q = Qarr
    cdef double[:, ::1] Gn = Garr
    cdef double ent = 0.0
    cdef Py_ssize_t ti, i, j, k, d, s
    cdef int a, b, mpi, mqi, np_, nq_, ii, jj, kk, zp
    cdef double m, m1, mp, mq, pref, fp, fq, sc, gn, Ered, Bv, FF1, lFF1, gw, lG, G, cB, fwd, rev, R, nrm
    cdef double v[3]
    cdef double v1[3]
    cdef double g[3]
    cdef double gh[3]
    cdef double e1[3]
    cdef double e2[3]
    cdef double om[3]
    cdef double gr[3]
    cdef double vcm[3]
    cdef double vp[3]
    cdef double vq[3]
    cdef long ip[27]
    cdef long iq[27]
    cdef double wp[27]
    cdef double wq[27]
    cdef double F_a, F_b, lf_a, lf_b
    with nogil:
        for ti in range(T):
            a = <int> tasks[ti, 0]
            b = <int> tasks[ti, 1]
            mpi = <int> tasks[ti, 2]
            pref = tasks[ti, 3]
            m = masses[a]
            m1 = masses[b]
            mp = masses[mpi]
            mq = m + m1 - mp
            mqi = <int> rint(mq) - 1
            sc = sqrt(m * m1) / (m + m1)
            fp = sc * sqrt(mq / mp)
            fq = sc * sqrt(mp / mq)
            for i in range(Nn):
                F_a = F[a, i]
                lf_a = logF[a, i] if F_a > 0 else 0.0
                # node coordinates from the flat index
                jj = <int> i
                for d in range(n - 1, -1, -1):
                    v[d] = vmin + h * (jj % Nv)
                    jj = jj // Nv
                for j in range(Nn):
                    F_b = F[b, j]
                    lf_b = logF[b, j] if F_b > 0 else 0.0
                    jj = <int> j
                    for d in range(n - 1, -1, -1):
                        v1[d] = vmin + h * (jj % Nv)
                        jj = jj // Nv
                    gn = 0.0
                    for d in range(n):
                        g[d] = v[d] - v1[d]
                        gn += g[d] * g[d]
                        vcm[d] = (m * v[d] + m1 * v1[d]) / (m + m1)
                    gn = sqrt(gn)
                    if gn > 0:
                        for d in range(n):
                            gh[d] = g[d] / gn
                    else:
                        for d in range(n):
                            gh[d] = 0.0
                        gh[0] = 1.0
                    if n == 2:
                        e1[0] = -gh[1]
                        e1[1] = gh[0]
                    elif n == 3:
                        if fabs(gh[0]) > 0.9:
                            e1[0] = 0.0; e1[1] = 1.0; e1[2] = 0.0
                        else:
                            e1[0] = 1.0; e1[1] = 0.0; e1[2] = 0.0
                        gw = e1[0] * gh[0] + e1[1] * gh[1] + e1[2] * gh[2]
                        nrm = 0.0
                        for d in range(3):
                            e1[d] = e1[d] - gw * gh[d]
                            nrm += e1[d] * e1[d]
                        nrm = sqrt(nrm)
                        for d in range(3):
                            e1[d] = e1[d] / nrm
                        e2[0] = gh[1] * e1[2] - gh[2] * e1[1]
                        e2[1] = gh[2] * e1[0] - gh[0] * e1[2]
                        e2[2] = gh[0] * e1[1] - gh[1] * e1[0]
                    Ered = m * m1 / (m + m1) * gn * gn
                    if expo != 0.0:
                        Bv = amp * pow(Ered, expo)
                    else:
                        Bv = amp
                    FF1 = F_a * F_b
                    lFF1 = lf_a + lf_b
                    for k in range(K):
                        gw = 0.0
                        for d in range(n):
                            om[d] = -quad[k, 0] * gh[d]
                            if n >= 2:
                                om[d] = om[d] + quad[k, 1] * e1[d]
                            if n == 3:
                                om[d] = om[d] + quad[k, 2] * e2[d]
                            gw += g[d] * om[d]
                        for d in range(n):
                            gr[d] = g[d] - 2.0 * gw * om[d]
                            vp[d] = vcm[d] + fp * gr[d]
                            vq[d] = vcm[d] - fq * gr[d]
                        np_ = _stencil(vp, n, Nv, vmin, h, ip, wp)
                        if np_ == 0:
                            continue
                        nq_ = _stencil(vq, n, Nv, vmin, h, iq, wq)
                        if nq_ == 0:
                            continue
                        lG = 0.0
                        zp = 0
                        for s in range(np_):
                            if F[mpi, ip[s]] > 0:
                                lG += wp[s] * logF[mpi, ip[s]]
                            elif wp[s] != 0.0:
                                zp = 1
                        for s in range(nq_):
                            if F[mqi, iq[s]] > 0:
                                lG += wq[s] * logF[mqi, iq[s]]
                            elif wq[s] != 0.0:
                                zp = 1
                        G = 0.0 if zp else exp(lG)
                        cB = pref * quad[k, 3] * Bv
                        fwd = cB * FF1
                        rev = cB * G
                        R = fwd - rev
                        Q[a, i] -= R
                        Q[b, j] -= R
                        Gn[a, i] += rev
                        Gn[b, j] += rev
                        for s in range(np_):
                            Q[mpi, ip[s]] += R * wp[s]
                            Gn[mpi, ip[s]] += fwd * wp[s]
                        for s in range(nq_):
                            Q[mqi, iq[s]] += R * wq[s]
                            Gn[mqi, iq[s]] += fwd * wq[s]
                        if zp == 0 and FF1 > 0:
                            ent += R * (lG - lFF1)
    return Qarr, Garr, ent
