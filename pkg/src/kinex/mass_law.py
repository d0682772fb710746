"""Mass statistics for the mass-exchange gas.

A :class:`MassLaw` carries the per-mass rate factors ``gamma_m`` on the
truncated mass set ``{1..M_max}`` and the velocity dimension ``n``.  The
equilibrium mass statistics are described by the weights
``w_m = m exp(beta m) / gamma_m``; every beta-average in the package goes
through :func:`log_weights`, which is evaluated with a max shift so that
extreme ``beta`` never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, RangeError

__all__ = [
    "MassLaw",
    "BetaWeights",
    "beta_weights",
    "log_weights",
    "partition_Z",
    "log_partition_Z",
    "beta_average",
    "mass_moment",
    "d_inv_mass_mean_d_beta",
    "beta_from_inv_mass_mean",
    "gaussian_moment",
]


@dataclass(frozen=True)
class MassLaw:
    """Truncated mass law.

    Parameters
    ----------
    gamma : sequence of float
        Strictly positive rate factors ``gamma_1 .. gamma_{M_max}``.
    n : int
        Velocity-space dimension, 1, 2 or 3.
    """

    gamma: tuple
    n: int = 2
    masses: np.ndarray = field(init=False, repr=False, compare=False)
    log_gamma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = tuple(float(x) for x in np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        if len(g) < 1:
            raise DomainError("M_max must be at least 1")
        if not all(math.isfinite(x) and x > 0.0 for x in g):
            raise DomainError("all gamma_m must be finite and strictly positive")
        if self.n not in (1, 2, 3):
            raise DomainError(f"velocity dimension n must be 1, 2 or 3, got {self.n}")
        object.__setattr__(self, "gamma", g)
        m = np.arange(1, len(g) + 1, dtype=float)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "log_gamma", np.log(np.asarray(g)))

    @property
    def M_max(self) -> int:
        return len(self.gamma)

    @classmethod
    def family(cls, M_max: int, a: float = 0.0, b: float = 0.0, c: float = 1.0, n: int = 2):
        """Preset ``gamma_m = c m^a exp(b m)``."""
        if M_max < 1:
            raise DomainError("M_max must be at least 1")
        m = np.arange(1, M_max + 1, dtype=float)
        return cls(tuple(c * m**a * np.exp(b * m)), n=n)

    @classmethod
    def table(cls, gamma, M_max: int | None = None, n: int = 2):
        gamma = list(gamma)
        if M_max is not None and len(gamma) != M_max:
            raise DomainError(f"gamma table has length {len(gamma)} but M_max = {M_max}")
        return cls(tuple(gamma), n=n)

    @classmethod
    def uniform(cls, M_max: int, n: int = 2):
        return cls((1.0,) * M_max, n=n)

    def to_dict(self) -> dict:
        return {"table": list(self.gamma), "M_max": self.M_max, "n": self.n}


@dataclass(frozen=True)
class BetaWeights:
    """Unnormalized equilibrium weights at a given ``beta``."""

    beta: float
    w: np.ndarray
    W: float


def log_weights(law: MassLaw, beta):
    """``log(m e^{beta m}/gamma_m)`` with shape ``beta.shape + (M_max,)``."""
    beta = np.asarray(beta, dtype=float)
    return np.log(law.masses) + beta[..., None] * law.masses - law.log_gamma


def _normalized(law: MassLaw, beta):
    lw = log_weights(law, beta)
    shift = lw.max(axis=-1, keepdims=True)
    e = np.exp(lw - shift)
    s = e.sum(axis=-1, keepdims=True)
    return e / s, shift[..., 0] + np.log(s[..., 0])


def beta_weights(law: MassLaw, beta: float) -> BetaWeights:
    lw = log_weights(law, float(beta))
    with np.errstate(over="ignore"):
        w = np.exp(lw)
    W = float(w.sum())
    if not np.all(np.isfinite(w)) or not math.isfinite(W) or W <= 0.0:
        raise RangeError(f"beta weights overflow at beta = {beta!r}")
    return BetaWeights(float(beta), w, W)


def log_partition_Z(law: MassLaw, beta, Theta):
    """``log Z(beta, Theta)``, finite for every finite ``beta``."""
    Theta = np.asarray(Theta, dtype=float)
    _, lse = _normalized(law, beta)
    return 0.5 * law.n * np.log(2.0 * np.pi * Theta) + lse


def partition_Z(law: MassLaw, beta, Theta):
    """Partition function ``(2 pi Theta)^{n/2} sum_m m e^{beta m}/gamma_m``."""
    if np.any(np.asarray(Theta) <= 0):
        raise DomainError("Theta must be positive")
    with np.errstate(over="ignore"):
        z = np.exp(log_partition_Z(law, beta, Theta))
    if not np.all(np.isfinite(z)):
        raise RangeError(f"partition function overflows at beta = {beta!r}")
    return float(z) if np.ndim(z) == 0 else z


def beta_average(law: MassLaw, beta, a):
    """Weighted average ``<a_m>_beta``; ``a`` is indexed by mass along its last axis."""
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != law.M_max:
        raise DomainError(f"sequence must have length M_max = {law.M_max}")
    p, _ = _normalized(law, beta)
    out = (p * a).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def mass_moment(law: MassLaw, beta, k: float):
    """``<m^k>_beta``."""
    return beta_average(law, beta, law.masses**k)


def d_inv_mass_mean_d_beta(law: MassLaw, beta):
    """``d<m^-1>/d beta = 1 - <m^-1><m>``."""
    p, _ = _normalized(law, beta)
    inv = (p / law.masses).sum(axis=-1)
    mean = (p * law.masses).sum(axis=-1)
    out = 1.0 - inv * mean
    if law.M_max == 1:
        out = np.zeros_like(out)
    return float(out) if np.ndim(out) == 0 else out


def beta_from_inv_mass_mean(law: MassLaw, target, tol: float = 1e-14, max_iter: int = 200):
    """Invert ``beta -> <m^-1>_beta``.

    Safeguarded Newton on a bracket that is expanded until it contains the
    root; any Newton step leaving the bracket is replaced by bisection.
    Works elementwise on arrays.

    Raises
    ------
    DomainError
        If ``target`` is outside ``(1/M_max, 1)``.
    ConvergenceError
        If the iteration does not converge in ``max_iter`` steps.
    """
    t = np.asarray(target, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t).astype(float)
    if law.M_max == 1:
        if np.any(np.abs(t - 1.0) > 1e-12):
            raise DomainError("single-mass law: <m^-1> must equal 1")
        out = np.zeros_like(t)
        return float(out[0]) if scalar else out
    lo_t, hi_t = 1.0 / law.M_max, 1.0
    if np.any(~(t > lo_t)) or np.any(~(t < hi_t)):
        raise DomainError(
            f"target <m^-1> must lie in the open interval ({lo_t:.6g}, 1); got {target!r}"
        )

    def g(b):
        p, _ = _normalized(law, b)
        inv = (p / law.masses).sum(axis=-1)
        mean = (p * law.masses).sum(axis=-1)
        return inv - t, 1.0 - inv * mean

    # g is decreasing in beta: grow a bracket [lo, hi] with g(lo) > 0 > g(hi)
    lo = np.full_like(t, -1.0)
    hi = np.full_like(t, 1.0)
    for _ in range(80):
        glo, _ = g(lo)
        bad = glo < 0
        if not bad.any():
            break
        hi = np.where(bad, lo, hi)
        lo = np.where(bad, 2.0 * lo, lo)
    for _ in range(80):
        ghi, _ = g(hi)
        bad = ghi > 0
        if not bad.any():
            break
        lo = np.where(bad, hi, lo)
        hi = np.where(bad, 2.0 * hi, hi)

    b = 0.5 * (lo + hi)
    done = np.zeros(t.shape, dtype=bool)
    for _ in range(max_iter):
        r, d = g(b)
        done |= np.abs(r) <= tol * np.maximum(t, 1.0) * 0.5
        lo = np.where(r > 0, b, lo)
        hi = np.where(r < 0, b, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            nb = b - r / d
        ok = np.isfinite(nb) & (nb > lo) & (nb < hi)
        nb = np.where(ok, nb, 0.5 * (lo + hi))
        step = np.abs(nb - b)
        b = np.where(done, b, nb)
        done |= (step <= 1e-15 * (1.0 + np.abs(b))) | (hi - lo <= 4e-16 * (1.0 + np.abs(b)))
        if done.all():
            break
    else:
        raise ConvergenceError("beta inversion did not converge")
    return float(b[0]) if scalar else b


def gaussian_moment(m: float, Theta: float, n: int, p: int = 0, kind: str = "scalar"):
    """Closed-form Gaussian moments of ``exp(-m|v|^2/(2 Theta))`` over R^n.

    ``scalar``  : integral of ``|v|^{2p}``
    ``tensor2`` : integral of ``|v|^{2p} v (x) v``
    ``tensor4`` : integral of ``v (x) v (x) v (x) v``  (``p`` ignored)
    """
    if m <= 0 or Theta <= 0:
        raise DomainError("mass and Theta must be positive")
    s = Theta / m
    base = (2.0 * np.pi * s) ** (0.5 * n)
    if kind == "scalar":
        return base * math.prod(n + 2 * k for k in range(p)) * s**p
    if kind == "tensor2":
        return base * math.prod(n + 2 * k for k in range(1, p + 1)) * s ** (p + 1) * np.eye(n)
    if kind == "tensor4":
        I = np.eye(n)
        E = (
            np.einsum("ij,kl->ijkl", I, I)
            + np.einsum("ik,jl->ijkl", I, I)
            + np.einsum("il,jk->ijkl", I, I)
        )
        return base * s**2 * E
    raise DomainError(f"unknown moment kind {kind!r}")
