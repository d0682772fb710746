"""Two-particle kinematics with mass exchange.

Two particles ``(m, v)`` and ``(m1, v1)`` leave a collision as ``(m', v')``
and ``(m1', v1')`` with ``m1' = m + m1 - m'``.  With ``g = v - v1`` and a unit
vector ``Omega`` satisfying ``Omega . g <= 0``::

    v'  = v_cm + s * sqrt(m1'/m') * (g - 2 (g.Omega) Omega)
    v1' = v_cm - s * sqrt(m'/m1') * (g - 2 (g.Omega) Omega)

where ``s = sqrt(m m1)/(m + m1)``.  Mass, momentum and kinetic energy are
conserved and ``sqrt(m m1)|g| = sqrt(m' m1')|g'|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ValidationError
from .mass_law import MassLaw

__all__ = [
    "Particle",
    "CollisionChannel",
    "Kernel",
    "com_velocity",
    "collide_forward",
    "collide_inverse",
    "collide_arrays",
    "velocity_jacobian",
    "allowed_channels",
    "channel_count",
    "channel_rate_A",
    "kernel_B",
    "reduced_energy",
]

_UNIT_TOL = 1e-12


class Particle(NamedTuple):
    m: int
    v: np.ndarray


@dataclass(frozen=True)
class CollisionChannel:
    m_out: int
    omega: tuple

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(x) for x in np.atleast_1d(self.omega)))


@dataclass(frozen=True)
class Kernel:
    """Isotropic scattering kernel ``B(E_red, cosine)``.

    ``maxwell`` gives the constant ``C_B``; ``power_law`` gives
    ``C_B * E_red**omega_exp``.
    """

    kind: str = "maxwell"
    C_B: float = 1.0
    omega_exp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("maxwell", "power_law"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if not self.C_B > 0:
            raise ValidationError("kernel amplitude C_B must be positive")
        if self.kind == "power_law" and not 0.0 <= self.omega_exp <= 0.5:
            raise ValidationError("power-law exponent must lie in [0, 1/2]")

    @property
    def exponent(self) -> float:
        return self.omega_exp if self.kind == "power_law" else 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "C_B": self.C_B, "omega_exp": self.omega_exp}


def _vec(v):
    return np.atleast_1d(np.asarray(v, dtype=float))


def com_velocity(p: Particle, q: Particle) -> np.ndarray:
    return (p.m * _vec(p.v) + q.m * _vec(q.v)) / (p.m + q.m)


def reduced_energy(m, m1, g2):
    """``E_red = m m1/(m + m1) |g|^2`` given ``|g|^2``."""
    return m * m1 / (m + m1) * g2


def _check_channel(m, m1, ch: CollisionChannel, n: int):
    if not 1 <= ch.m_out <= m + m1 - 1:
        raise DomainError(f"m_out = {ch.m_out} outside 1..{m + m1 - 1}")
    om = np.asarray(ch.omega)
    if om.shape != (n,):
        raise ValidationError(f"omega must have {n} components")
    if abs(np.linalg.norm(om) - 1.0) > _UNIT_TOL:
        raise ValidationError("omega must be a unit vector")
    return om


def collide_arrays(m, m1, v, v1, m_out, omega):
    """Vectorized collision law.

    ``v``, ``v1`` and ``omega`` have shape ``(..., n)``; masses broadcast
    against the leading axes.  No validation is done here.
    """
    m = np.asarray(m, dtype=float)[..., None]
    m1 = np.asarray(m1, dtype=float)[..., None]
    mp = np.asarray(m_out, dtype=float)[..., None]
    mp1 = m + m1 - mp
    g = v - v1
    gw = np.sum(g * omega, axis=-1, keepdims=True)
    gr = g - 2.0 * gw * omega
    vcm = (m * v + m1 * v1) / (m + m1)
    s = np.sqrt(m * m1) / (m + m1)
    return vcm + s * np.sqrt(mp1 / mp) * gr, vcm - s * np.sqrt(mp / mp1) * gr


def collide_forward(p: Particle, q: Particle, ch: CollisionChannel):
    v, v1 = _vec(p.v), _vec(q.v)
    om = _check_channel(p.m, q.m, ch, v.size)
    g = v - v1
    if om @ g > _UNIT_TOL * (1.0 + np.linalg.norm(g)):
        raise DomainError("omega must satisfy omega . (v - v1) <= 0")
    vp, vp1 = collide_arrays(p.m, q.m, v, v1, ch.m_out, om)
    return Particle(int(ch.m_out), vp), Particle(int(p.m + q.m - ch.m_out), vp1)


def collide_inverse(p: Particle, q: Particle, ch: CollisionChannel):
    """Undo a forward collision.

    ``p, q`` are the outgoing particles; ``ch.m_out`` is the original first
    mass and ``ch.omega`` the vector used in the forward collision.  The
    inverse law is the forward law applied with ``Omega' = -Omega``.
    """
    v, v1 = _vec(p.v), _vec(q.v)
    om = -_check_channel(p.m, q.m, ch, v.size)
    g = v - v1
    if om @ g > _UNIT_TOL * (1.0 + np.linalg.norm(g)):
        raise DomainError("inverse collision requires -omega . (v' - v1') <= 0")
    vp, vp1 = collide_arrays(p.m, q.m, v, v1, ch.m_out, om)
    return Particle(int(ch.m_out), vp), Particle(int(p.m + q.m - ch.m_out), vp1)


def velocity_jacobian(m: int, m1: int, m_out: int, n: int) -> float:
    """``|det d(v, v1)/d(v', v1')| = (m' m1'/(m m1))^{n/2}``."""
    if not 1 <= m_out <= m + m1 - 1:
        raise DomainError(f"m_out = {m_out} outside 1..{m + m1 - 1}")
    mp1 = m + m1 - m_out
    return float((m_out * mp1 / (m * m1)) ** (0.5 * n))


def allowed_channels(law: MassLaw, m: int, m1: int) -> list[int]:
    M = law.M_max
    if not (1 <= m <= M and 1 <= m1 <= M):
        raise DomainError(f"masses must lie in 1..{M}")
    return list(range(max(1, m + m1 - M), min(M, m + m1 - 1) + 1))


def channel_count(M_max: int, m, m1):
    """Number of allowed outgoing splits, vectorized over ``m, m1``."""
    s = np.asarray(m) + np.asarray(m1)
    return np.minimum(M_max, s - 1) - np.maximum(1, s - M_max) + 1


def channel_rate_A(law: MassLaw, m: int, m1: int, m_out: int) -> float:
    if m_out in allowed_channels(law, m, m1):
        return law.gamma[m - 1] * law.gamma[m1 - 1]
    return 0.0


def kernel_B(k: Kernel, E_red, cosine=None):
    E_red = np.asarray(E_red, dtype=float)
    if np.any(E_red < 0):
        raise DomainError("reduced energy must be nonnegative")
    if k.kind == "maxwell":
        out = np.full(E_red.shape, k.C_B)
    elif k.omega_exp == 0.0:
        out = np.full(E_red.shape, k.C_B)
    else:
        out = k.C_B * E_red**k.omega_exp
    return float(out) if out.ndim == 0 else out
