"""Direct simulation Monte Carlo of the homogeneous mass-exchange dynamics.

Each simulated particle stands for ``weight`` physical particles in a unit
volume.  An unordered pair ``(i, j)`` collides at rate::

    weight * |allowed channels| * gamma_m gamma_m1 * B(E_red) * |half sphere|

and candidate pairs are drawn against a majorant of that rate (null
collisions).  On acceptance the outgoing mass is uniform over the allowed
channels and ``Omega`` is uniform on the half sphere ``Omega . g <= 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .collision import Kernel, Particle, channel_count, collide_arrays, kernel_B
from .errors import DomainError, ValidationError
from .fluid import PrimitiveState, inv_mass_means
from .kinetic import macro_from_moments
from .mass_law import MassLaw, _normalized

__all__ = [
    "ParticleEnsemble",
    "MajorantConfig",
    "half_sphere_measure",
    "sample_omega",
    "sample_equilibrium",
    "collide_round",
    "estimate_macro",
    "mass_histogram",
    "entropy_estimate",
    "run_relaxation",
]

log = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator used for every stochastic run."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass
class ParticleEnsemble:
    m: np.ndarray
    v: np.ndarray
    weight: float
    rng_seed: int = 0
    time: float = 0.0
    rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.int64)
        self.v = np.asarray(self.v, dtype=float)
        if self.v.ndim == 1:
            self.v = self.v[:, None]
        if self.m.ndim != 1 or self.v.shape[0] != self.m.size:
            raise ValidationError("m must be (N,) and v must be (N, n)")
        if self.m.size < 2:
            raise ValidationError("an ensemble needs at least 2 particles")
        if np.any(self.m < 1):
            raise DomainError("particle masses must be positive integers")
        if not self.weight > 0:
            raise ValidationError("particle weight must be positive")
        if self.rng is None:
            self.rng = make_rng(self.rng_seed)

    @property
    def size(self) -> int:
        return self.m.size

    @property
    def n(self) -> int:
        return self.v.shape[1]

    @property
    def particles(self) -> list[Particle]:
        return [Particle(int(a), b.copy()) for a, b in zip(self.m, self.v)]

    def totals(self) -> np.ndarray:
        """Ensemble totals ``[count, mass, momentum..., m|v|^2]`` (unweighted)."""
        mv = self.m[:, None] * self.v
        return np.concatenate(
            [[self.size, self.m.sum()], mv.sum(0), [np.sum(self.m * np.sum(self.v**2, 1))]]
        ).astype(float)


@dataclass(frozen=True)
class MajorantConfig:
    B_max: float
    channel_count_max: int
    gamma_max: float

    @classmethod
    def build(cls, law: MassLaw, kernel: Kernel, ens: ParticleEnsemble | None = None, margin: float = 1.5):
        M = law.M_max
        ccm = int(np.max(channel_count(M, *np.meshgrid(np.arange(1, M + 1), np.arange(1, M + 1)))))
        if kernel.exponent == 0.0:
            B = kernel.C_B
        else:
            if ens is None:
                raise ValidationError("a power-law majorant needs the ensemble speed range")
            vmax = float(np.max(np.linalg.norm(ens.v, axis=1))) * margin
            E_bound = 0.5 * M * (2.0 * vmax) ** 2
            B = kernel.C_B * max(E_bound, 1e-300) ** kernel.exponent
        return cls(float(B), ccm, float(max(law.gamma)))

    def rate(self, weight: float, n: int) -> float:
        return weight * self.channel_count_max * self.gamma_max**2 * self.B_max * half_sphere_measure(n)


def half_sphere_measure(n: int) -> float:
    """Measure of ``{Omega : Omega . g <= 0}`` on the unit sphere (1 for n = 1)."""
    return {1: 1.0, 2: math.pi, 3: 2.0 * math.pi}[n]


def sample_omega(rng: np.random.Generator, g, n: int | None = None) -> np.ndarray:
    """Uniform draw on the half sphere opposite to ``g``; vectorized over rows."""
    g = np.asarray(g, dtype=float)
    single = g.ndim == 1
    G = np.atleast_2d(g)
    n = G.shape[1] if n is None else n
    gn = np.linalg.norm(G, axis=1)
    if np.any(gn == 0):
        raise DomainError("relative velocity is zero; the half sphere is undefined")
    if n == 1:
        om = -np.sign(G)
    else:
        om = rng.standard_normal(G.shape)
        om /= np.linalg.norm(om, axis=1, keepdims=True)
        flip = np.sum(om * G, axis=1) > 0
        om[flip] *= -1.0
    return om[0] if single else om


def sample_equilibrium(
    law: MassLaw, prim: PrimitiveState, count: int, seed: int = 0, time: float = 0.0
) -> ParticleEnsemble:
    """Draw ``count`` particles from ``rho M_{u, Theta, beta}``."""
    rng = make_rng(seed)
    rho, beta, Theta = float(prim.rho), float(prim.beta), float(prim.Theta)
    u = np.asarray(prim.u, dtype=float).reshape(-1)
    p, _ = _normalized(law, beta)
    num = p / law.masses
    num /= num.sum()  # number fractions ∝ e^{beta m}/gamma_m
    m = rng.choice(np.arange(1, law.M_max + 1), size=count, p=num)
    v = u[None] + np.sqrt(Theta / m)[:, None] * rng.standard_normal((count, law.n))
    weight = rho * float(inv_mass_means(law, beta)[0]) / count
    return ParticleEnsemble(m, v, weight, seed, time, rng)


def _pair_rate(law, kernel, maj, weight, n, mi, mj, g2):
    cc = channel_count(law.M_max, mi, mj)
    gam = np.asarray(law.gamma)
    E = mi * mj / (mi + mj) * g2
    B = kernel_B(kernel, E)
    B = np.broadcast_to(B, E.shape)
    return weight * cc * gam[mi - 1] * gam[mj - 1] * B * half_sphere_measure(n), B


def collide_round(
    ens: ParticleEnsemble,
    law: MassLaw,
    kernel: Kernel,
    maj: MajorantConfig,
    dt: float,
    audit: list | None = None,
) -> ParticleEnsemble:
    """Advance ``ens`` by ``dt`` with no-time-counter pair selection.

    Candidates are processed in sub-rounds of disjoint random pairs so that
    each particle collides at most once per sub-round.  The returned
    ensemble carries the (possibly refreshed) majorant in ``ens.majorant``.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if ens.n != law.n:
        raise ValidationError("ensemble and law disagree on n")
    if np.any(ens.m > law.M_max):
        raise DomainError(f"particle masses must lie in 1..{law.M_max}")
    N = ens.size
    rng = ens.rng
    m, v = ens.m.copy(), ens.v.copy()
    for _attempt in range(8):
        rmax = maj.rate(ens.weight, law.n)
        per_particle = (N - 1) * rmax * dt
        if per_particle > 1.0:
            raise ValidationError(
                f"dt too large: expected majorant collisions per particle {per_particle:.3g} > 1"
            )
        n_cand = 0.5 * N * (N - 1) * rmax * dt
        half = N // 2
        subs = max(1, math.ceil(n_cand / half))
        q = n_cand / (subs * half)
        state = rng.bit_generator.state
        ok = True
        m_new, v_new = m.copy(), v.copy()
        events = []
        for _ in range(subs):
            perm = rng.permutation(N)[: 2 * half]
            I, J = perm[0::2], perm[1::2]
            g = v_new[I] - v_new[J]
            g2 = np.sum(g**2, axis=1)
            rate, B = _pair_rate(law, kernel, maj, ens.weight, law.n, m_new[I], m_new[J], g2)
            if np.any(B > maj.B_max * (1.0 + 1e-12)):
                ok = False
                break
            accept = (rng.random(half) < q * rate / rmax) & (g2 > 0)
            I, J, g = I[accept], J[accept], g[accept]
            if I.size == 0:
                continue
            mi, mj = m_new[I], m_new[J]
            s = mi + mj
            lo = np.maximum(1, s - law.M_max)
            hi = np.minimum(law.M_max, s - 1)
            mp = lo + np.floor(rng.random(I.size) * (hi - lo + 1)).astype(np.int64)
            mp = np.minimum(mp, hi)
            om = sample_omega(rng, g, law.n)
            vp, vq = collide_arrays(mi, mj, v_new[I], v_new[J], mp, om)
            if audit is not None:
                events.append((mi, mj, mp))
            m_new[I], m_new[J] = mp, s - mp
            v_new[I], v_new[J] = vp, vq
        if ok:
            if audit is not None:
                gam = np.asarray(law.gamma)
                for mi, mj, mp in events:
                    for a, b, c in zip(mi, mj, mp):
                        fwd = gam[a - 1] * gam[b - 1]
                        rev = gam[c - 1] * gam[a + b - c - 1]
                        audit.append((int(a), int(b), int(c), float(fwd), float(rev)))
            out = ParticleEnsemble(m_new, v_new, ens.weight, ens.rng_seed, ens.time + dt, rng)
            out.majorant = maj
            return out
        # kernel exceeded the bound: rewind the stream, refresh and retry
        rng.bit_generator.state = state
        tmp = ParticleEnsemble(m, v, ens.weight, ens.rng_seed, ens.time, rng)
        new = MajorantConfig.build(law, kernel, tmp, margin=2.0)
        log.warning("majorant refreshed: B_max %.4g -> %.4g", maj.B_max, new.B_max)
        maj = new
    raise ValidationError("majorant refresh did not bound the kernel")


def _raw_totals(law, m, v, weight):
    mv = m[:, None] * v
    return weight * np.concatenate(
        [[m.size, m.sum()], mv.sum(0), [np.sum(m * np.sum(v**2, 1))]]
    )


def estimate_macro(ens: ParticleEnsemble, law: MassLaw, groups: int = 100):
    """Macro fields from sample moments and delete-a-group jackknife errors.

    Returns ``(fields, stderr)`` where ``stderr`` is a dict with keys
    ``rho``, ``u``, ``Theta`` and ``beta``.
    """
    N = ens.size
    if N < 100:
        raise ValidationError("estimate_macro needs at least 100 particles")
    n = ens.n
    m = ens.m.astype(float)
    x = np.concatenate(
        [np.ones((N, 1)), m[:, None], m[:, None] * ens.v, (m * np.sum(ens.v**2, 1))[:, None]], axis=1
    )
    total = ens.weight * x.sum(0)
    fields = macro_from_moments(law, total)
    G = min(groups, N)
    lab = np.arange(N) % G
    sums = np.zeros((G, x.shape[1]))
    np.add.at(sums, lab, x)
    counts = np.bincount(lab, minlength=G)
    # leave one group out, rescaled to the full particle count
    loo = (x.sum(0)[None] - sums) * (N / (N - counts))[:, None] * ens.weight
    jk = macro_from_moments(law, loo)

    def se(a):
        a = np.asarray(a)
        return np.sqrt((G - 1) / G * np.sum((a - a.mean(0)) ** 2, axis=0))

    err = {"rho": float(se(jk.rho)), "u": se(jk.u.reshape(G, n)), "Theta": float(se(jk.Theta)), "beta": float(se(jk.beta))}
    return fields, err


def mass_histogram(ens: ParticleEnsemble, M_max: int | None = None) -> np.ndarray:
    """Counts of particles with mass ``1..M_max``."""
    M = int(ens.m.max()) if M_max is None else M_max
    return np.bincount(ens.m, minlength=M + 1)[1 : M + 1]


def entropy_estimate(ens: ParticleEnsemble, law: MassLaw, bins: int | None = None) -> float:
    """Histogram estimate of ``sum_m int f (log(gamma f/m^{n/2}) - 1) dv``."""
    n = ens.n
    if bins is None:
        bins = {1: 64, 2: 24, 3: 10}[n]
    lo = ens.v.min(0)
    hi = ens.v.max(0)
    width = (hi - lo) * (1.0 + 1e-9) / bins
    vol = float(np.prod(width))
    S = 0.0
    for mm in range(1, law.M_max + 1):
        sel = ens.m == mm
        if not sel.any():
            continue
        idx = np.floor((ens.v[sel] - lo) / width).astype(np.int64)
        flat = np.ravel_multi_index(idx.T, (bins,) * n)
        c = np.bincount(flat)
        c = c[c > 0]
        f = ens.weight * c / vol
        S += vol * float(np.sum(f * (np.log(law.gamma[mm - 1] * f / mm ** (0.5 * n)) - 1.0)))
    return S


def run_relaxation(ens, law, kernel, dt, steps, every: int = 1, maj=None):
    """Collide repeatedly; return the final ensemble and time-series rows.

    Row layout: ``time, rho, u_1..u_n, Theta, beta, S_estimate, count_1..count_M``.
    """
    maj = maj or MajorantConfig.build(law, kernel, ens)
    rows = []

    def row(e):
        fld, _ = estimate_macro(e, law)
        return (
            [e.time, float(fld.rho)]
            + np.asarray(fld.u).reshape(-1).tolist()
            + [float(fld.Theta), float(fld.beta), entropy_estimate(e, law)]
            + mass_histogram(e, law.M_max).tolist()
        )

    rows.append(row(ens))
    for k in range(1, steps + 1):
        ens = collide_round(ens, law, kernel, maj, dt)
        maj = ens.majorant
        if k % every == 0 or k == steps:
            rows.append(row(ens))
    return ens, rows
