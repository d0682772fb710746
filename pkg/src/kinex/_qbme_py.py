"""Pure numpy evaluation of the discrete mass-exchange collision operator.

This is the fallback for :mod:`kinex._qbme_c`; both expose
:func:`qbme_kernel` with the same signature and semantics.

Each event is an ordered pair of nodes ``(a, i)``, ``(b, j)``, an outgoing
mass and an angular node ``Omega_k``.  Its net rate is::

    R = pref * w_k * B * (F_ai F_bj - G')

where ``F = gamma f / m^{n/2}`` and ``G' = exp(sum_s w_s log F_s)`` over the
quadratic remapping stencils of both outgoing particles.  ``R`` is removed
from the two incoming nodes and deposited on the stencils with weights
``w_s``.  The stencils reproduce ``1, v, |v|^2`` exactly, so every event
conserves number per outgoing particle, momentum and energy.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 1 << 16


def _frames(gh, n):
    """Unit vectors orthogonal to ``gh`` (rows), following a fixed rule."""
    if n == 1:
        return None, None
    if n == 2:
        return np.stack([-gh[:, 1], gh[:, 0]], axis=1), None
    ax = np.zeros_like(gh)
    use_y = np.abs(gh[:, 0]) > 0.9
    ax[~use_y, 0] = 1.0
    ax[use_y, 1] = 1.0
    e1 = ax - np.sum(ax * gh, axis=1, keepdims=True) * gh
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(gh, e1)
    return e1, e2


def _stencil(v, n, Nv, vmin, h):
    """Quadratic tensor stencil: flat indices (P, 3^n), weights, validity mask."""
    t = (v - vmin) / h
    k0 = np.rint(t)
    s = t - k0
    k0 = k0.astype(np.int64)
    ok = np.all((k0 >= 1) & (k0 <= Nv - 2), axis=1)
    w1 = np.stack([0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)], axis=-1)  # (P, n, 3)
    idx = np.zeros((v.shape[0], 1), dtype=np.int64)
    w = np.ones((v.shape[0], 1))
    for d in range(n):
        kd = (k0[:, d][:, None] + np.arange(-1, 2)[None, :])  # (P, 3)
        idx = (idx[:, :, None] * Nv + kd[:, None, :]).reshape(v.shape[0], -1)
        w = (w[:, :, None] * w1[:, d][:, None, :]).reshape(v.shape[0], -1)
    return idx, w, ok


def qbme_kernel(F, logF, masses, n, Nv, vmin, h, quad, tasks, amp, expo):
    """Accumulate ``(h^n Q, h^n gain, entropy production)``.

    Parameters
    ----------
    F, logF : (M, Nn) arrays
        Scaled distribution and its log (``-inf`` where ``F == 0``).
    masses : (M,) float
    quad : (K, 4) array of ``(c, s1, s2, weight)``; ``Omega = -c g^ + s1 e1 + s2 e2``.
    tasks : (T, 4) array of ``(a, b, mp_index, pref)``.
    amp, expo : kernel amplitude and reduced-energy exponent.
    """
    M, Nn = F.shape
    nodes1 = vmin + h * np.arange(Nv)
    grids = np.meshgrid(*([nodes1] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    Qacc = np.zeros(M * Nn)
    gain = np.zeros(M * Nn)
    ent = 0.0
    Fpos = F > 0
    logFs = np.where(Fpos, logF, 0.0).ravel()
    Ff = F.ravel()
    zero = (~Fpos).ravel()
    all_i = np.repeat(np.arange(Nn), Nn)
    all_j = np.tile(np.arange(Nn), Nn)
    for a, b, mpi, pref in tasks:
        a, b, mpi = int(a), int(b), int(mpi)
        m, m1 = masses[a], masses[b]
        mp = masses[mpi]
        mq = m + m1 - mp
        mqi = int(round(mq)) - 1
        s_scale = np.sqrt(m * m1) / (m + m1)
        fp = s_scale * np.sqrt(mq / mp)
        fq = s_scale * np.sqrt(mp / mq)
        for c0 in range(0, Nn * Nn, _CHUNK):
            I = all_i[c0 : c0 + _CHUNK]
            J = all_j[c0 : c0 + _CHUNK]
            v = nodes[I]
            v1 = nodes[J]
            g = v - v1
            gn = np.linalg.norm(g, axis=1)
            gh = np.zeros_like(g)
            nz = gn > 0
            gh[nz] = g[nz] / gn[nz, None]
            gh[~nz, 0] = 1.0
            e1, e2 = _frames(gh, n)
            E_red = m * m1 / (m + m1) * gn**2
            B = amp * E_red**expo if expo != 0.0 else np.full(gn.shape, amp)
            FF1 = Ff[a * Nn + I] * Ff[b * Nn + J]
            lFF1 = logFs[a * Nn + I] + logFs[b * Nn + J]
            vcm = (m * v + m1 * v1) / (m + m1)
            for c, s1, s2, wk in quad:
                om = -c * gh
                if n >= 2:
                    om = om + s1 * e1
                if n == 3:
                    om = om + s2 * e2
                gr = g - 2.0 * np.sum(g * om, axis=1, keepdims=True) * om
                vp = vcm + fp * gr
                vq = vcm - fq * gr
                ip, wp, okp = _stencil(vp, n, Nv, vmin, h)
                iq, wq, okq = _stencil(vq, n, Nv, vmin, h)
                ok = okp & okq
                if not ok.any():
                    continue
                ip, wp, iq, wq = ip[ok], wp[ok], iq[ok], wq[ok]
                ip = ip + mpi * Nn
                iq = iq + mqi * Nn
                lG = np.sum(wp * logFs[ip], axis=1) + np.sum(wq * logFs[iq], axis=1)
                hit = np.any(zero[ip] & (wp != 0), axis=1) | np.any(zero[iq] & (wq != 0), axis=1)
                G = np.where(hit, 0.0, np.exp(np.where(hit, 0.0, lG)))
                cB = pref * wk * B[ok]
                fwd = cB * FF1[ok]
                rev = cB * G
                R = fwd - rev
                ia = a * Nn + I[ok]
                jb = b * Nn + J[ok]
                Qacc -= np.bincount(ia, R, M * Nn) + np.bincount(jb, R, M * Nn)
                Qacc += np.bincount(ip.ravel(), (R[:, None] * wp).ravel(), M * Nn)
                Qacc += np.bincount(iq.ravel(), (R[:, None] * wq).ravel(), M * Nn)
                gain += np.bincount(ia, rev, M * Nn) + np.bincount(jb, rev, M * Nn)
                gain += np.bincount(ip.ravel(), (fwd[:, None] * wp).ravel(), M * Nn)
                gain += np.bincount(iq.ravel(), (fwd[:, None] * wq).ravel(), M * Nn)
                good = ~hit & (FF1[ok] > 0)
                if good.any():
                    ent += float(np.sum(R[good] * (lG[good] - lFF1[ok][good])))
    return Qacc.reshape(M, Nn), gain.reshape(M, Nn), ent
