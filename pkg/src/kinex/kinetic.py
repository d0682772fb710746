"""Discrete-velocity kinetic model with mass exchange.

Velocities live on a uniform midpoint grid of ``[-v_max, v_max]^n`` with
quadrature weight ``h^n`` per node.  A distribution is an array ``f`` of
shape ``(M_max, N_v^n)`` for one cell, or ``(cells, M_max, N_v^n)`` for a
1-D spatial run.  Moment vectors use the fluid column order
``[N, rho, P, E]`` throughout.

The collision operator is evaluated from the symmetrized pair form of the
weak formulation.  With ``F_m = gamma_m f_m / m^{n/2}`` every discrete event
moves the net rate::

    R = 1/4 h^{2n} (m m1)^{n/2} w_k B (F F1 - G')

from the two incoming nodes onto quadratic stencils around the outgoing
velocities, where ``G'`` is the geometric interpolation of ``F' F1'`` on
those stencils.  Conservation, the sign of the entropy production and the
equilibrium fixed point then hold exactly on the grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .collision import Kernel, allowed_channels
from .errors import ConvergenceError, DomainError, StepError, ValidationError
from .fluid import Grid1D, PrimitiveState, cons_to_prim, prim_to_cons
from .mass_law import MassLaw, beta_from_inv_mass_mean
from .thermo import entropic_from_prim

__all__ = [
    "VelocityGrid",
    "KineticState",
    "MacroFields",
    "raw_moments",
    "macro_from_moments",
    "macro_fields",
    "discrete_maxwellian",
    "maxwellian_from_prim",
    "half_sphere_quadrature",
    "q_bme",
    "q_bme_parts",
    "entropy_production",
    "kinetic_entropy",
    "kinetic_entropy_flux",
    "bgk_step_homogeneous",
    "bgkme_step_1d",
    "advect",
    "linearized_bgk_matrix",
    "write_snapshot",
]

MacroFields = PrimitiveState

MAX_WORK = 10**9


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint grid with ``N_v`` nodes per axis on ``[-v_max, v_max]``."""

    n: int
    v_max: float
    N_v: int
    allow_odd: bool = False

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValidationError(f"velocity dimension must be 1, 2 or 3, got {self.n}")
        if not self.v_max > 0:
            raise ValidationError("v_max must be positive")
        if self.N_v < 3:
            raise ValidationError("N_v must be at least 3")
        if self.N_v % 2 and not self.allow_odd:
            raise ValidationError("N_v must be even (pass allow_odd=True to override)")

    @property
    def h(self) -> float:
        return 2.0 * self.v_max / self.N_v

    @property
    def weight(self) -> float:
        return self.h**self.n

    @property
    def vmin(self) -> float:
        return -self.v_max + 0.5 * self.h

    @property
    def nodes1(self) -> np.ndarray:
        return self.vmin + self.h * np.arange(self.N_v)

    @property
    def size(self) -> int:
        return self.N_v**self.n

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates ``(N_v^n, n)`` in C order."""
        g = np.meshgrid(*([self.nodes1] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)

    def to_dict(self) -> dict:
        return {"n": self.n, "v_max": self.v_max, "N_v": self.N_v}


@dataclass
class KineticState:
    law: MassLaw
    grid: VelocityGrid
    f: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.law.n != self.grid.n:
            raise ValidationError("mass law and velocity grid disagree on n")
        if self.f.ndim not in (2, 3) or self.f.shape[-2:] != (self.law.M_max, self.grid.size):
            raise ValidationError(
                f"f must have shape ([cells,] {self.law.M_max}, {self.grid.size}), got {self.f.shape}"
            )
        if not np.all(np.isfinite(self.f)):
            raise DomainError("f must be finite")

    @property
    def cells(self) -> int | None:
        return self.f.shape[0] if self.f.ndim == 3 else None

    def with_f(self, f) -> "KineticState":
        return KineticState(self.law, self.grid, f)


# ------------------------------------------------------------------ moments


def _features(law: MassLaw, grid: VelocityGrid) -> np.ndarray:
    """Collision invariants ``(m v, 1, m, m|v|^2)`` per (mass, node), shape ``(M, Nn, n+3)``."""
    v = grid.nodes
    m = law.masses[:, None]
    n = law.n
    X = np.empty((law.M_max, grid.size, n + 3))
    X[..., :n] = m[..., None] * v[None]
    X[..., n] = 1.0
    X[..., n + 1] = m
    X[..., n + 2] = m * np.sum(v**2, axis=1)[None]
    return X


def raw_moments(state: KineticState) -> np.ndarray:
    """``[N, rho, P, E]`` per cell from quadrature sums."""
    law, grid = state.law, state.grid
    w = grid.weight
    m = law.masses[:, None]
    v = grid.nodes
    f = state.f
    N = w * f.sum(axis=(-2, -1))
    mf = w * (m * f).sum(axis=-2)  # (..., Nn)
    rho = mf.sum(-1)
    P = mf @ v
    E = mf @ np.sum(v**2, axis=1)
    return np.concatenate([N[..., None], rho[..., None], P, E[..., None]], axis=-1)


def macro_from_moments(law: MassLaw, raw) -> PrimitiveState:
    """Fields ``(rho, u, Theta, beta)`` from ``[N, rho, P, E]``.

    ``Theta = (E - rho|u|^2)/(n N)`` and ``beta`` inverts ``<m^-1> = N/rho``.
    """
    raw = np.asarray(raw, dtype=float)
    n = law.n
    N, rho, P, E = raw[..., 0], raw[..., 1], raw[..., 2 : 2 + n], raw[..., -1]
    if np.any(~(rho > 0)):
        raise DomainError("inadmissible moments: rho > 0 fails")
    u = P / rho[..., None]
    internal = E - rho * np.sum(u**2, axis=-1)
    if np.any(~(internal > 0)):
        raise DomainError("inadmissible moments: E - |P|^2/rho > 0 fails")
    ratio = N / rho
    if law.M_max == 1:
        if np.any(np.abs(ratio - 1.0) > 1e-12):
            raise DomainError("inadmissible moments: N = rho fails for a single-mass law")
        beta = np.zeros_like(rho)
    else:
        if np.any(~(ratio > 1.0 / law.M_max)) or np.any(~(ratio < 1.0)):
            raise DomainError(f"inadmissible moments: 1/{law.M_max} < N/rho < 1 fails")
        beta = beta_from_inv_mass_mean(law, ratio)
    return PrimitiveState(rho, u, internal / (n * N), beta)


def macro_fields(state: KineticState) -> PrimitiveState:
    return macro_from_moments(state.law, raw_moments(state))


# --------------------------------------------------------- discrete Maxwellian


def _moment_scales(T):
    """Per-component tolerance scales for moments in entropic order ``(P, N, rho, E)``."""
    n = T.shape[-1] - 3
    s = np.empty_like(T)
    rho, E = T[..., n + 1], T[..., n + 2]
    s[..., :n] = np.sqrt(np.abs(rho * E))[..., None]
    s[..., n] = np.abs(T[..., n])
    s[..., n + 1] = np.abs(rho)
    s[..., n + 2] = np.abs(E)
    return s


def _match(law, grid, target, a0=None, tol=1e-12, max_iter=50):
    """Newton solve for entropic parameters; returns ``(f, a)`` per cell.

    ``target`` is ``(C, n+3)`` in fluid order.
    """
    n = law.n
    T_fluid = np.atleast_2d(np.asarray(target, dtype=float))
    C = T_fluid.shape[0]
    T = np.concatenate([T_fluid[:, 2:-1], T_fluid[:, :2], T_fluid[:, -1:]], axis=1)
    X = _features(law, grid).reshape(-1, n + 3)
    base = np.repeat(0.5 * n * np.log(law.masses) - law.log_gamma, grid.size)
    w = grid.weight
    keep = np.arange(n + 3)
    if law.M_max == 1:
        keep = keep[keep != n + 1]
    Xk = X[:, keep]
    Tk = T[:, keep]
    scale = _moment_scales(T)[:, keep]

    if a0 is None:
        prim = macro_from_moments(law, T_fluid)
        a = entropic_from_prim(law, prim).to_vector()
        if law.M_max == 1:
            a[:, n] += a[:, n + 1]
    else:
        a = np.atleast_2d(np.array(a0, dtype=float))
    a = a[:, keep].copy()

    def evaluate(a, Tk=Tk):
        with np.errstate(over="ignore", invalid="ignore"):
            lf = base[None] + a @ Xk.T
            f = np.exp(lf)
            mom = w * f @ Xk
            phi = w * f.sum(1) - np.sum(a * Tk, axis=1)
        return f, mom, phi

    f, mom, phi = evaluate(a)
    polished = np.zeros(C, dtype=bool)
    for it in range(max_iter + 1):
        r = Tk - mom
        err = np.max(np.abs(r) / scale, axis=1)
        conv = err <= tol
        # one extra Newton step after reaching tolerance pushes the residual to round-off
        done = polished & conv
        if done.all():
            break
        if it == max_iter:
            raise ConvergenceError(
                f"discrete Maxwellian matching failed after {max_iter} iterations "
                f"(relative residual {err.max():.2e}); enlarge v_max or N_v"
            )
        act = ~done
        polished = conv.copy()
        H = np.einsum("ck,kd,ke->cde", w * f[act], Xk, Xk)
        d = np.sqrt(np.einsum("cii->ci", H))
        Hs = H / (d[:, :, None] * d[:, None, :])
        try:
            delta = np.linalg.solve(Hs, (r[act] / d)[..., None])[..., 0] / d
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular moment Hessian; velocity grid too coarse") from exc
        slope = -np.sum(r[act] * delta, axis=1)
        t = np.ones(act.sum())
        a_act = a[act]
        phi_act = phi[act]
        for _ in range(40):
            a_try = a_act + t[:, None] * delta
            f_try, mom_try, phi_try = evaluate(a_try, Tk[act])
            ok = np.isfinite(phi_try) & (
                phi_try <= phi_act + 1e-4 * t * slope + 1e-13 * (np.abs(phi_act) + 1.0)
            )
            if ok.all():
                break
            t = np.where(ok, t, 0.5 * t)
        a[act] = a_try
        f[act] = f_try
        mom[act] = mom_try
        phi[act] = phi_try
    full = np.zeros((C, n + 3))
    full[:, keep] = a
    return f.reshape(C, law.M_max, grid.size), full


def discrete_maxwellian(law: MassLaw, grid: VelocityGrid, target, a0=None, return_params: bool = False):
    """Exponential-family distribution whose discrete moments equal ``target``.

    ``target`` is ``[N, rho, P, E]`` (one cell) or ``(cells, n+3)``.  The
    result is ``m^{n/2}/gamma_m exp(D.mv + A + B m + C m|v|^2)``.
    """
    target = np.asarray(target, dtype=float)
    single = target.ndim == 1
    if a0 is not None:
        a0 = np.atleast_2d(a0)
    f, a = _match(law, grid, target, a0=a0)
    if single:
        f, a = f[0], a[0]
    st = KineticState(law, grid, f)
    return (st, a) if return_params else st


def maxwellian_from_prim(law: MassLaw, grid: VelocityGrid, prim: PrimitiveState) -> KineticState:
    """Discrete Maxwellian carrying the continuum moments of ``prim``."""
    return discrete_maxwellian(law, grid, prim_to_cons(law, prim).to_array())


# -------------------------------------------------------- collision operator


def half_sphere_quadrature(n: int, n_omega: int = 16) -> np.ndarray:
    """Rows ``(c, s1, s2, weight)``: ``Omega = -c g^ + s1 e1 + s2 e2``.

    n=1: the single point ``-g^``.  n=2: midpoint rule in the angle on
    ``(-pi/2, pi/2)``.  n=3: Gauss-Legendre in ``c`` on ``[0, 1]`` times a
    uniform azimuth rule.  Weights sum to the half-sphere measure.
    """
    if n == 1:
        return np.array([[1.0, 0.0, 0.0, 1.0]])
    if n_omega < 1:
        raise ValidationError("n_omega must be positive")
    if n == 2:
        th = -0.5 * np.pi + (np.arange(n_omega) + 0.5) * np.pi / n_omega
        return np.stack([np.cos(th), np.sin(th), np.zeros(n_omega), np.full(n_omega, np.pi / n_omega)], 1)
    if n == 3:
        nc = max(1, n_omega // 4)
        x, wx = np.polynomial.legendre.leggauss(nc)
        c = 0.5 * (x + 1.0)
        wc = 0.5 * wx
        ph = 2.0 * np.pi * (np.arange(n_omega) + 0.5) / n_omega
        C, P = np.meshgrid(c, ph, indexing="ij")
        W = np.outer(wc, np.full(n_omega, 2.0 * np.pi / n_omega))
        S = np.sqrt(1.0 - C**2)
        return np.stack([C.ravel(), (S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), W.ravel()], 1)
    raise ValidationError(f"unsupported dimension {n}")


def _tasks(law: MassLaw, grid: VelocityGrid) -> np.ndarray:
    h2n = grid.h ** (2 * law.n)
    rows = []
    for a in range(law.M_max):
        for b in range(law.M_max):
            m, m1 = a + 1, b + 1
            pref = 0.25 * h2n * (m * m1) ** (0.5 * law.n)
            for mp in allowed_channels(law, m, m1):
                rows.append((a, b, mp - 1, pref))
    return np.array(rows, dtype=float).reshape(-1, 4)


def _scaled(state: KineticState):
    law = state.law
    F = state.f * np.exp(law.log_gamma - 0.5 * law.n * np.log(law.masses))[:, None]
    with np.errstate(divide="ignore"):
        logF = np.log(F)
    return np.ascontiguousarray(F), np.ascontiguousarray(logF)


def predicted_work(law: MassLaw, grid: VelocityGrid, n_omega: int = 16) -> int:
    return len(_tasks(law, grid)) * grid.size**2 * len(half_sphere_quadrature(law.n, n_omega))


def q_bme_parts(state: KineticState, kernel: Kernel, n_omega: int = 16, backend: str | None = None):
    """``(Q, gain, loss, dS/dt)`` for a single cell.

    ``Q`` is the collision operator per node (density rate), ``gain`` and
    ``loss`` are the nonnegative-in-the-continuum split ``Q = gain - loss``
    and the last entry is ``sum h^n Q log F`` assembled event by event.
    """
    if state.f.ndim != 2:
        raise ValidationError("q_bme acts on a single spatial cell")
    law, grid = state.law, state.grid
    quad = np.ascontiguousarray(half_sphere_quadrature(law.n, n_omega))
    tasks = np.ascontiguousarray(_tasks(law, grid))
    work = len(tasks) * grid.size**2 * len(quad)
    if work > MAX_WORK:
        raise ValidationError(f"predicted work {work:.3g} exceeds the limit {MAX_WORK:.0e}")
    F, logF = _scaled(state)
    kern = _backend.get_kernel(backend)
    Qh, Gh, ent = kern(
        F, logF, np.ascontiguousarray(law.masses), law.n, grid.N_v, grid.vmin, grid.h,
        quad, tasks, float(kernel.C_B), float(kernel.exponent),
    )
    Q = np.asarray(Qh) / grid.weight
    gain = np.asarray(Gh) / grid.weight
    return Q, gain, gain - Q, float(ent)


def q_bme(state: KineticState, kernel: Kernel, n_omega: int = 16, backend: str | None = None) -> np.ndarray:
    return q_bme_parts(state, kernel, n_omega, backend)[0]


def entropy_production(state: KineticState, kernel: Kernel, n_omega: int = 16, backend: str | None = None) -> float:
    """``sum_m int Q_m log(gamma_m f_m / m^{n/2}) dv`` on the grid; never positive."""
    if np.any(~(state.f > 0)):
        raise DomainError("entropy production needs f > 0 at every node (floor f at 1e-300)")
    return q_bme_parts(state, kernel, n_omega, backend)[3]


# ----------------------------------------------------------------- entropy


def _flogF(state: KineticState):
    law = state.law
    f = state.f
    shift = law.log_gamma - 0.5 * law.n * np.log(law.masses)
    pos = f > 0
    out = np.zeros_like(f)
    out[pos] = f[pos] * (np.log(f[pos]) + np.broadcast_to(shift[:, None], f.shape)[pos] - 1.0)
    if np.any(f < 0):
        raise DomainError("kinetic entropy needs f >= 0")
    return out


def kinetic_entropy(state: KineticState):
    """``sum_m int f (log(gamma f / m^{n/2}) - 1) dv`` per cell."""
    s = state.grid.weight * _flogF(state).sum(axis=(-2, -1))
    return float(s) if np.ndim(s) == 0 else s


def kinetic_entropy_flux(state: KineticState) -> np.ndarray:
    return state.grid.weight * _flogF(state).sum(axis=-2) @ state.grid.nodes


# --------------------------------------------------------------------- BGK


def bgk_step_homogeneous(state: KineticState, dt: float, eps: float) -> KineticState:
    """Exact relaxation ``f <- M + (f - M) exp(-dt/eps)`` toward the matched Maxwellian."""
    if not dt > 0 or not eps > 0:
        raise ValidationError("dt and eps must be positive")
    M = discrete_maxwellian(state.law, state.grid, raw_moments(state)).f
    return state.with_f(M + (state.f - M) * math.exp(-dt / eps))


def advect(f: np.ndarray, vx: np.ndarray, dt: float, dx: float, scheme: str = "minmod") -> np.ndarray:
    """Periodic transport ``f_t + vx f_x = 0`` along axis 0 for time ``dt``.

    ``upwind`` is first order, ``minmod`` is MUSCL-Hancock with a minmod
    slope, ``spectral`` applies the exact Fourier shift.
    """
    C = f.shape[0]
    if scheme == "spectral":
        k = 2.0 * np.pi * np.fft.rfftfreq(C, d=dx)
        fh = np.fft.rfft(f, axis=0)
        fh *= np.exp(-1j * k[:, None, None] * vx[None, None, :] * dt)
        return np.fft.irfft(fh, n=C, axis=0)
    nu = vx * dt / dx
    fp = np.roll(f, -1, axis=0)
    if scheme == "upwind":
        face = np.where(vx > 0, f, fp)
    elif scheme == "minmod":
        fm = np.roll(f, 1, axis=0)
        a, b = fp - f, f - fm
        s = np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)
        sp = np.roll(s, -1, axis=0)
        face = np.where(vx > 0, f + 0.5 * (1.0 - nu) * s, fp - 0.5 * (1.0 + nu) * sp)
    else:
        raise ValidationError(f"unknown advection scheme {scheme!r}")
    flux = nu * face
    return f - (flux - np.roll(flux, 1, axis=0))


def bgkme_step_1d(
    state: KineticState,
    dt: float,
    eps: float,
    grid: Grid1D,
    scheme: str = "minmod",
    params=None,
    return_params: bool = False,
):
    """Strang step: half transport, exact BGK relaxation, half transport.

    ``params`` optionally warm-starts the per-cell Maxwellian matching with
    the entropic parameters returned by the previous step.
    """
    if state.f.ndim != 3:
        raise ValidationError("bgkme_step_1d needs f with shape (cells, M, Nn)")
    if grid.bc != "periodic":
        raise ValidationError("bgkme_step_1d supports periodic boundaries only")
    if state.f.shape[0] != grid.cells:
        raise ValidationError("state and spatial grid disagree on the number of cells")
    if not dt > 0 or not eps > 0:
        raise ValidationError("dt and eps must be positive")
    vx = state.grid.nodes[:, 0]
    vmax = float(np.max(np.abs(vx)))
    if dt * vmax > grid.dx * (1.0 + 1e-12):
        raise StepError(f"CFL violated: dt = {dt:.3e} > dx / v_max = {grid.dx / vmax:.3e}")
    f = advect(state.f, vx, 0.5 * dt, grid.dx, scheme)
    Mx, a = discrete_maxwellian(
        state.law, state.grid, raw_moments(state.with_f(f)), a0=params, return_params=True
    )
    f = Mx.f + (f - Mx.f) * math.exp(-dt / eps)
    out = state.with_f(advect(f, vx, 0.5 * dt, grid.dx, scheme))
    return (out, a) if return_params else out


def linearized_bgk_matrix(law: MassLaw, grid: VelocityGrid, f_eq: np.ndarray) -> np.ndarray:
    """Matrix of ``delta -> P delta - delta`` at the equilibrium ``f_eq``.

    ``P`` is the derivative of ``f -> discrete_maxwellian(raw_moments(f))``,
    the projection onto the tangent space of the Maxwellian family.
    """
    X = _features(law, grid).reshape(-1, law.n + 3)
    if law.M_max == 1:
        X = np.delete(X, law.n + 1, axis=1)
    fe = np.asarray(f_eq, dtype=float).ravel()
    w = grid.weight
    H = (w * fe[:, None] * X).T @ X
    P = (fe[:, None] * X) @ np.linalg.solve(H, w * X.T)
    return P - np.eye(fe.size)


# ---------------------------------------------------------------- snapshots


def write_snapshot(state: KineticState, path, meta: dict | None = None) -> tuple[Path, Path]:
    """CSV rows ``cell_index, m, v_index_1..n, f_value`` plus a JSON sidecar."""
    path = Path(path)
    law, grid = state.law, state.grid
    f = state.f if state.f.ndim == 3 else state.f[None]
    idx = np.array(np.unravel_index(np.arange(grid.size), (grid.N_v,) * grid.n)).T
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["cell_index", "m"] + [f"v_index_{d + 1}" for d in range(grid.n)] + ["f_value"])
        for c in range(f.shape[0]):
            for a in range(law.M_max):
                for k in range(grid.size):
                    wr.writerow([c, a + 1, *idx[k].tolist(), repr(float(f[c, a, k]))])
    side = path.with_suffix(".json")
    doc = {"grid": grid.to_dict(), "law": law.to_dict(), "cells": int(f.shape[0]), "nodes": "midpoint"}
    if meta:
        doc.update(meta)
    side.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path, side
