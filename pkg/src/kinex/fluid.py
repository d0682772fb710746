"""One-dimensional finite-volume solvers for the mass-exchange fluid systems.

The conserved vector per cell is stored in the column order
``[N, rho, P_1 .. P_n, E]`` with ``E = rho |u|^2 + n rho Theta <m^-1>``
(no factor 1/2; twice the classical total energy).  The pseudo-pressure
``p~ = rho Theta <m^-1>`` plays the role of the perfect-gas pressure with
``gamma_gas = (n + 2)/n``.

Hyperbolic part: HLL with Davis speeds, MUSCL-minmod reconstruction of
``(rho, u, p~, beta)``, SSP-RK2 in time.  NSME adds explicit diffusive face
fluxes built from two-point gradients and arithmetic face averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, StepError, ValidationError
from .mass_law import (
    MassLaw,
    _normalized,
    beta_from_inv_mass_mean,
    log_partition_Z,
    log_weights,
)

__all__ = [
    "PrimitiveState",
    "ConservedState",
    "Grid1D",
    "inv_mass_means",
    "prim_to_cons",
    "cons_to_prim",
    "euler_flux",
    "max_wave_speed",
    "gamma_gas",
    "eme_rhs",
    "eme_step",
    "transport_coeffs",
    "population_potential_chi",
    "slab_sigma",
    "face_data",
    "nsme_diffusive_fluxes",
    "nsme_rhs",
    "nsme_step",
    "stable_dt",
    "exact_riemann_single_mass",
    "nsme_rhs_spectral",
    "nsme_solve_spectral",
]


@dataclass
class PrimitiveState:
    """Fields ``(rho, u, Theta, beta)``; ``u`` has a trailing axis of length n."""

    rho: np.ndarray
    u: np.ndarray
    Theta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim == self.rho.ndim:
            self.u = self.u[..., None]
        self.Theta = np.asarray(self.Theta, dtype=float)
        self.beta = np.broadcast_to(np.asarray(self.beta, dtype=float), self.rho.shape).copy()

    def __getitem__(self, idx):
        return PrimitiveState(self.rho[idx], self.u[idx], self.Theta[idx], self.beta[idx])


@dataclass
class ConservedState:
    N: np.ndarray
    rho: np.ndarray
    P: np.ndarray
    E: np.ndarray

    def to_array(self) -> np.ndarray:
        return np.concatenate(
            [self.N[..., None], self.rho[..., None], self.P, self.E[..., None]], axis=-1
        )

    @classmethod
    def from_array(cls, U) -> "ConservedState":
        U = np.asarray(U, dtype=float)
        return cls(U[..., 0], U[..., 1], U[..., 2:-1], U[..., -1])


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D grid; ``eps = 0`` selects the EME system."""

    cells: int
    dx: float
    bc: str = "periodic"
    eps: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if self.cells < 3:
            raise ValidationError("need at least 3 cells")
        if not self.dx > 0:
            raise ValidationError("dx must be positive")
        if self.bc not in ("periodic", "outflow"):
            raise ValidationError(f"unknown boundary condition {self.bc!r}")
        if self.eps < 0:
            raise ValidationError("eps must be nonnegative")

    @classmethod
    def uniform(cls, cells: int, length: float = 1.0, bc: str = "periodic", eps: float = 0.0, x0=0.0):
        if cells < 3:
            raise ValidationError("need at least 3 cells")
        return cls(cells, length / cells, bc, eps, x0)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + (np.arange(self.cells) + 0.5) * self.dx


def gamma_gas(n: int) -> float:
    return (n + 2.0) / n


def inv_mass_means(law: MassLaw, beta):
    """``(<m^-1>, <m>, <m^-2>)`` at ``beta`` (vectorized)."""
    p, _ = _normalized(law, beta)
    m = law.masses
    return (p / m).sum(-1), (p * m).sum(-1), (p / m**2).sum(-1)


def prim_to_cons(law: MassLaw, p: PrimitiveState) -> ConservedState:
    inv = inv_mass_means(law, p.beta)[0]
    P = p.rho[..., None] * p.u
    E = p.rho * np.sum(p.u**2, axis=-1) + law.n * p.rho * p.Theta * inv
    return ConservedState(p.rho * inv, p.rho.copy(), P, E)


def cons_to_prim(law: MassLaw, c) -> PrimitiveState:
    """Invert :func:`prim_to_cons`; accepts a ConservedState or an array."""
    if not isinstance(c, ConservedState):
        c = ConservedState.from_array(c)
    N, rho, P, E = c.N, c.rho, c.P, c.E
    if np.any(~(rho > 0)):
        raise DomainError("admissibility violated: rho > 0")
    if np.any(~(N > 0)):
        raise DomainError("admissibility violated: N > 0")
    u = P / rho[..., None]
    internal = E - rho * np.sum(u**2, axis=-1)
    if np.any(~(internal > 0)):
        raise DomainError("admissibility violated: E - |P|^2/rho > 0")
    ratio = N / rho
    if law.M_max == 1:
        if np.any(np.abs(ratio - 1.0) > 1e-12):
            raise DomainError("admissibility violated: N = rho for a single-mass law")
        beta = np.zeros_like(rho)
        inv = np.ones_like(rho)
    else:
        if np.any(~(ratio > 1.0 / law.M_max)) or np.any(~(ratio < 1.0)):
            raise DomainError(f"admissibility violated: 1/{law.M_max} < N/rho < 1")
        beta = beta_from_inv_mass_mean(law, ratio)
        inv = inv_mass_means(law, beta)[0]
    Theta_t = internal / (law.n * rho)
    return PrimitiveState(rho.copy(), u, Theta_t / inv, beta)


def euler_flux(law: MassLaw, p: PrimitiveState) -> np.ndarray:
    """x-flux of ``[N, rho, P, E]`` in the slab."""
    inv = inv_mass_means(law, p.beta)[0]
    return _flux_from(p.rho, p.u, p.rho * p.Theta * inv, p.rho * inv)


def _flux_from(rho, u, pt, N):
    ux = u[..., 0]
    F = np.empty(rho.shape + (u.shape[-1] + 3,))
    F[..., 0] = N * ux
    F[..., 1] = rho * ux
    F[..., 2:-1] = rho[..., None] * ux[..., None] * u
    F[..., 2] += pt
    F[..., -1] = (rho * np.sum(u**2, axis=-1) + (u.shape[-1] + 2) * pt) * ux
    return F


def max_wave_speed(law: MassLaw, p: PrimitiveState):
    inv = inv_mass_means(law, p.beta)[0]
    c = np.sqrt(gamma_gas(law.n) * p.Theta * inv)
    return np.abs(p.u[..., 0]) + c


# ---------------------------------------------------------------- hyperbolic


def _pad(a, g, bc):
    if bc == "periodic":
        return np.concatenate([a[-g:], a, a[:g]], axis=0)
    return np.concatenate([np.repeat(a[:1], g, 0), a, np.repeat(a[-1:], g, 0)], axis=0)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _recon_vars(law, prim):
    inv = inv_mass_means(law, prim.beta)[0]
    pt = prim.rho * prim.Theta * inv
    return np.concatenate([prim.rho[:, None], prim.u, pt[:, None], prim.beta[:, None]], axis=1)


def _hll(law, WL, WR):
    n = law.n
    rL, uL, pL, bL = WL[:, 0], WL[:, 1 : 1 + n], WL[:, 1 + n], WL[:, 2 + n]
    rR, uR, pR, bR = WR[:, 0], WR[:, 1 : 1 + n], WR[:, 1 + n], WR[:, 2 + n]
    invL = inv_mass_means(law, bL)[0] if law.M_max > 1 else np.ones_like(rL)
    invR = inv_mass_means(law, bR)[0] if law.M_max > 1 else np.ones_like(rR)
    FL = _flux_from(rL, uL, pL, rL * invL)
    FR = _flux_from(rR, uR, pR, rR * invR)
    UL = _cons_from(rL, uL, pL, rL * invL, n)
    UR = _cons_from(rR, uR, pR, rR * invR, n)
    g = gamma_gas(n)
    cL = np.sqrt(g * pL / rL)
    cR = np.sqrt(g * pR / rR)
    SL = np.minimum(uL[:, 0] - cL, uR[:, 0] - cR)
    SR = np.maximum(uL[:, 0] + cL, uR[:, 0] + cR)
    SLc = np.minimum(SL, 0.0)[:, None]
    SRc = np.maximum(SR, 0.0)[:, None]
    # SLc <= 0 <= SRc covers the supersonic cases: F = F_L when SL >= 0, F_R when SR <= 0
    den = SRc - SLc
    den = np.where(den > 0, den, 1.0)
    return (SRc * FL - SLc * FR + SLc * SRc * (UR - UL)) / den


def _cons_from(rho, u, pt, N, n):
    U = np.empty(rho.shape + (n + 3,))
    U[:, 0] = N
    U[:, 1] = rho
    U[:, 2:-1] = rho[:, None] * u
    U[:, -1] = rho * np.sum(u**2, axis=-1) + n * pt
    return U


def _face_states(law, prim, bc, order):
    W = _recon_vars(law, prim)
    Wp = _pad(W, 2, bc)
    if order == 1:
        s = np.zeros_like(Wp)
    else:
        d = np.diff(Wp, axis=0)
        s = np.zeros_like(Wp)
        s[1:-1] = _minmod(d[:-1], d[1:])
        # first-order fallback where the reconstruction would leave the admissible set
        n = law.n
        for k in (0, 1 + n):
            bad = (Wp[:, k] - 0.5 * np.abs(s[:, k]) <= 0)
            s[bad] = 0.0
    # faces i+1/2 for i = -1..cells-1  (cells + 1 faces)
    WL = (Wp + 0.5 * s)[1:-2]
    WR = (Wp - 0.5 * s)[2:-1]
    return WL, WR


def eme_rhs(law: MassLaw, U: np.ndarray, grid: Grid1D, order: int = 2, prim=None) -> np.ndarray:
    """Semi-discrete hyperbolic right side ``-(F_{i+1/2} - F_{i-1/2})/dx``."""
    if prim is None:
        prim = cons_to_prim(law, U)
    WL, WR = _face_states(law, prim, grid.bc, order)
    F = _hll(law, WL, WR)
    return -(F[1:] - F[:-1]) / grid.dx


def _check_dt(law, U, grid, dt, cfl, eps, prim=None):
    lim = stable_dt(law, U, grid, cfl, eps, prim=prim)
    if dt > lim * (1.0 + 1e-12):
        raise StepError(f"time step {dt:.3e} exceeds stability limit {lim:.3e}")


def eme_step(law: MassLaw, U, grid: Grid1D, dt: float, order: int = 2, cfl: float = 0.45, check: bool = True):
    """One SSP-RK2 step of the EME system."""
    U = np.asarray(U, dtype=float)
    prim = cons_to_prim(law, U)
    if check:
        _check_dt(law, U, grid, dt, cfl, 0.0, prim=prim)
    U1 = U + dt * eme_rhs(law, U, grid, order, prim=prim)
    U2 = U1 + dt * eme_rhs(law, U1, grid, order)
    return _admissible(law, 0.5 * (U + U2))


def _admissible(law, U):
    try:
        cons_to_prim(law, U)
    except DomainError as exc:
        raise StepError(f"inadmissible state after step: {exc}") from exc
    return U


# ----------------------------------------------------------------- diffusion


def transport_coeffs(law: MassLaw, p: PrimitiveState):
    """Viscosity, heat conductivity and population diffusivity."""
    inv, _, inv2 = inv_mass_means(law, p.beta)
    rT = p.rho * p.Theta
    mu = rT * inv
    kappa = 0.5 * (law.n + 2) * rT * inv2
    nu = rT * (inv2 - inv**2)
    if law.M_max == 1:
        nu = np.zeros_like(mu)
    return mu, kappa, nu


def population_potential_chi(law: MassLaw, p: PrimitiveState, form: int = 1):
    """``chi = log(rho Theta / sum_m m e^{beta m}/gamma_m)``.

    ``form=2`` evaluates the equivalent ``log((2 pi)^{n/2} rho Theta^{(n+2)/2} / Z)``.
    """
    if form == 1:
        lw = log_weights(law, p.beta)
        sh = lw.max(-1)
        lse = sh + np.log(np.exp(lw - sh[..., None]).sum(-1))
        return np.log(p.rho) + np.log(p.Theta) - lse
    n = law.n
    return (
        0.5 * n * np.log(2 * np.pi)
        + np.log(p.rho)
        + 0.5 * (n + 2) * np.log(p.Theta)
        - log_partition_Z(law, p.beta, p.Theta)
    )


def slab_sigma(dudx: np.ndarray) -> np.ndarray:
    """Full traceless strain tensor for fields depending on x only.

    ``dudx`` has a trailing axis of length n; returns ``(..., n, n)``.
    """
    n = dudx.shape[-1]
    s = np.zeros(dudx.shape + (n,))
    s[..., 0, :] = dudx
    s[..., :, 0] = dudx
    s[..., 0, 0] = 2.0 * dudx[..., 0]
    s -= (2.0 / n) * dudx[..., 0][..., None, None] * np.eye(n)
    return s


@dataclass
class FaceData:
    """Face-centred averages and two-point gradients for faces i+1/2.

    Face ``k`` sits between cells ``k`` and ``k+1`` (periodic wrap or
    zero-gradient ghost at the right end).
    """

    Theta: np.ndarray
    u: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    nu: np.ndarray
    rho: np.ndarray
    logZ: np.ndarray
    dchi: np.ndarray
    dTheta: np.ndarray
    du: np.ndarray


def face_data(law: MassLaw, prim: PrimitiveState, grid: Grid1D) -> FaceData:
    def nxt(a):
        if grid.bc == "periodic":
            return np.roll(a, -1, axis=0)
        return np.concatenate([a[1:], a[-1:]], axis=0)

    def avg(a):
        return 0.5 * (a + nxt(a))

    def grad(a):
        return (nxt(a) - a) / grid.dx

    mu, kappa, nu = transport_coeffs(law, prim)
    chi = population_potential_chi(law, prim)
    logZ = log_partition_Z(law, prim.beta, prim.Theta)
    return FaceData(
        Theta=avg(prim.Theta),
        u=avg(prim.u),
        mu=avg(mu),
        kappa=avg(kappa),
        nu=avg(nu),
        rho=avg(prim.rho),
        logZ=avg(logZ),
        dchi=grad(chi),
        dTheta=grad(prim.Theta),
        du=grad(prim.u),
    )


def nsme_diffusive_fluxes(law: MassLaw, prim_or_U, grid: Grid1D, eps: float, faces: FaceData | None = None):
    """Diffusive x-fluxes at faces i+1/2, columns ``[N, rho, P, E]``."""
    prim = prim_or_U if isinstance(prim_or_U, PrimitiveState) else cons_to_prim(law, prim_or_U)
    fd = faces if faces is not None else face_data(law, prim, grid)
    n = law.n
    sig = slab_sigma(fd.du)
    sx = sig[..., 0, :]  # sigma_{x alpha}
    G = np.zeros(fd.Theta.shape + (n + 3,))
    G[:, 0] = eps * fd.nu * fd.dchi
    G[:, 2:-1] = eps * fd.mu[:, None] * sx
    G[:, -1] = eps * (
        (n + 2) * fd.nu * fd.Theta * fd.dchi
        + 2.0 * fd.kappa * fd.dTheta
        + 2.0 * fd.mu * np.sum(sx * fd.u, axis=-1)
    )
    return G


def _flux_divergence(G, grid):
    # face k is i+1/2 of cell k; left face of cell k is face k-1
    if grid.bc == "periodic":
        Gm = np.roll(G, 1, axis=0)
    else:
        Gm = np.concatenate([np.zeros_like(G[:1]), G[:-1]], axis=0)
        G = G.copy()
        G[-1] = 0.0
    return (G - Gm) / grid.dx


def nsme_rhs(law: MassLaw, U, grid: Grid1D, eps: float, order: int = 2, prim=None):
    if prim is None:
        prim = cons_to_prim(law, U)
    r = eme_rhs(law, U, grid, order, prim=prim)
    if eps > 0:
        r = r + _flux_divergence(nsme_diffusive_fluxes(law, prim, grid, eps), grid)
    return r


def nsme_step(law: MassLaw, U, grid: Grid1D, dt: float, eps: float, order: int = 2, cfl: float = 0.45, check: bool = True):
    """One SSP-RK2 step of the NSME system (explicit diffusion)."""
    if eps == 0:
        return eme_step(law, U, grid, dt, order, cfl, check)
    U = np.asarray(U, dtype=float)
    prim = cons_to_prim(law, U)
    if check:
        _check_dt(law, U, grid, dt, cfl, eps, prim=prim)
    U1 = U + dt * nsme_rhs(law, U, grid, eps, order, prim=prim)
    U2 = U1 + dt * nsme_rhs(law, U1, grid, eps, order)
    return _admissible(law, 0.5 * (U + U2))


def stable_dt(law: MassLaw, U, grid: Grid1D, cfl: float = 0.45, eps: float = 0.0, prim=None) -> float:
    """``min(cfl dx / lambda_max, 0.4 dx^2 / (eps D_max))``.

    ``D_max`` is the largest generalized eigenvalue of the slab Onsager
    block against the Hessian of the Massieu-Planck potential, i.e. the
    fastest diffusion rate of the frozen-coefficient linear system.
    """
    if prim is None:
        prim = cons_to_prim(law, U)
    lam = float(np.max(max_wave_speed(law, prim)))
    dt = cfl * grid.dx / lam
    if eps > 0:
        from .thermo import diffusivity_max

        D = float(np.max(diffusivity_max(law, prim, 1.0)))
        if D > 0:
            dt = min(dt, 0.4 * grid.dx**2 / (eps * D))
    return dt


# ------------------------------------------------------- spectral reference


def _dx_spectral(a, length):
    k = 2.0 * np.pi * np.fft.rfftfreq(a.shape[0], d=length / a.shape[0])
    shape = (-1,) + (1,) * (a.ndim - 1)
    return np.fft.irfft(1j * k.reshape(shape) * np.fft.rfft(a, axis=0), n=a.shape[0], axis=0)


def nsme_rhs_spectral(law: MassLaw, U, length: float, eps: float):
    """Pseudo-spectral NSME right side on a periodic interval.

    Same fluxes as the finite-volume solver evaluated pointwise, with Fourier
    derivatives.  Meant for smooth reference solutions.
    """
    prim = cons_to_prim(law, U)
    n = law.n
    F = euler_flux(law, prim)
    if eps > 0:
        mu, kappa, nu = transport_coeffs(law, prim)
        chi = population_potential_chi(law, prim)
        dchi = _dx_spectral(chi, length)
        dT = _dx_spectral(prim.Theta, length)
        du = _dx_spectral(prim.u, length)
        sx = slab_sigma(du)[..., 0, :]
        G = np.zeros_like(F)
        G[:, 0] = eps * nu * dchi
        G[:, 2:-1] = eps * mu[:, None] * sx
        G[:, -1] = eps * (
            (n + 2) * nu * prim.Theta * dchi + 2.0 * kappa * dT + 2.0 * mu * np.sum(sx * prim.u, axis=-1)
        )
        F = F - G
    return -_dx_spectral(F, length)


def nsme_solve_spectral(law: MassLaw, U0, length: float, eps: float, t_end: float, dt: float):
    """Classical RK4 integration of :func:`nsme_rhs_spectral` to ``t_end``."""
    U = np.asarray(U0, dtype=float).copy()
    steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    h = t_end / steps
    for _ in range(steps):
        k1 = nsme_rhs_spectral(law, U, length, eps)
        k2 = nsme_rhs_spectral(law, U + 0.5 * h * k1, length, eps)
        k3 = nsme_rhs_spectral(law, U + 0.5 * h * k2, length, eps)
        k4 = nsme_rhs_spectral(law, U + h * k3, length, eps)
        U = U + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return U


# ------------------------------------------------------------- exact Riemann


def exact_riemann_single_mass(left, right, gamma_gas: float, x, t: float, x0: float = 0.0, tol: float = 1e-12):
    """Exact ideal-gas Riemann solution sampled at ``(x - x0)/t``.

    ``left``/``right`` are ``(rho, u, p)``.  Returns ``(rho, u, p, p_star, u_star)``.
    Star pressure from Newton iteration on the pressure function.
    """
    g = float(gamma_gas)
    rL, uL, pL = map(float, left)
    rR, uR, pR = map(float, right)
    cL, cR = np.sqrt(g * pL / rL), np.sqrt(g * pR / rR)
    if 2.0 / (g - 1.0) * (cL + cR) <= uR - uL:
        raise DomainError("initial data generate vacuum")

    def fk(p, r, pk, ck):
        if p > pk:
            A = 2.0 / ((g + 1.0) * r)
            B = (g - 1.0) / (g + 1.0) * pk
            q = np.sqrt(A / (p + B))
            return (p - pk) * q, q * (1.0 - 0.5 * (p - pk) / (B + p))
        e = (g - 1.0) / (2.0 * g)
        return 2.0 * ck / (g - 1.0) * ((p / pk) ** e - 1.0), 1.0 / (r * ck) * (p / pk) ** (-(g + 1.0) / (2.0 * g))

    # two-rarefaction initial guess
    e = (g - 1.0) / (2.0 * g)
    p = ((cL + cR - 0.5 * (g - 1.0) * (uR - uL)) / (cL / pL**e + cR / pR**e)) ** (1.0 / e)
    p = max(p, 1e-14)
    for _ in range(100):
        fL, dL = fk(p, rL, pL, cL)
        fR, dR = fk(p, rR, pR, cR)
        pn = p - (fL + fR + uR - uL) / (dL + dR)
        if pn < 0:
            pn = 0.5 * p
        if abs(pn - p) <= tol * 0.5 * (pn + p):
            p = pn
            break
        p = pn
    else:
        raise ConvergenceError("star pressure iteration did not converge")
    fL, _ = fk(p, rL, pL, cL)
    fR, _ = fk(p, rR, pR, cR)
    us = 0.5 * (uL + uR) + 0.5 * (fR - fL)

    S = (np.asarray(x, dtype=float) - x0) / t
    rho = np.empty_like(S)
    u = np.empty_like(S)
    pr = np.empty_like(S)
    gm = (g - 1.0) / (g + 1.0)
    for side in ("L", "R"):
        sgn = -1.0 if side == "L" else 1.0
        r, uk, pk, ck = (rL, uL, pL, cL) if side == "L" else (rR, uR, pR, cR)
        mask = S <= us if side == "L" else S > us
        s = S[mask]
        if p > pk:  # shock
            rs = r * (p / pk + gm) / (gm * p / pk + 1.0)
            Ssh = uk + sgn * ck * np.sqrt((g + 1.0) / (2.0 * g) * p / pk + (g - 1.0) / (2.0 * g))
            outside = s * sgn > Ssh * sgn
            rho[mask] = np.where(outside, r, rs)
            u[mask] = np.where(outside, uk, us)
            pr[mask] = np.where(outside, pk, p)
        else:  # rarefaction
            rs = r * (p / pk) ** (1.0 / g)
            cs = ck * (p / pk) ** ((g - 1.0) / (2.0 * g))
            head = uk + sgn * ck
            tail = us + sgn * cs
            fan_u = 2.0 / (g + 1.0) * (-sgn * ck + 0.5 * (g - 1.0) * uk + s)
            fan_c = 2.0 / (g + 1.0) * (ck - sgn * 0.5 * (g - 1.0) * (uk - s))
            fan_r = r * (fan_c / ck) ** (2.0 / (g - 1.0))
            fan_p = pk * (fan_c / ck) ** (2.0 * g / (g - 1.0))
            out = s * sgn >= head * sgn
            star = s * sgn <= tail * sgn
            rho[mask] = np.where(out, r, np.where(star, rs, fan_r))
            u[mask] = np.where(out, uk, np.where(star, us, fan_u))
            pr[mask] = np.where(out, pk, np.where(star, p, fan_p))
    return rho, u, pr, p, us
