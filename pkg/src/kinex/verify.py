"""Quick self-checks exposed by ``kinex verify``.

Each suite returns a list of ``{"name", "passed", "value", "tol"}`` records.
They are smaller versions of the test-suite oracles, sized to run in a few
seconds.
"""

from __future__ import annotations

import numpy as np

from .collision import CollisionChannel, Kernel, Particle, collide_arrays, collide_forward, collide_inverse, velocity_jacobian
from .fluid import PrimitiveState, prim_to_cons
from .mass_law import MassLaw


def _rec(name, value, tol, passed=None):
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "passed": ok, "value": value, "tol": tol}


def random_states(law: MassLaw, count: int, rng, u_scale: float = 1.0) -> PrimitiveState:
    return PrimitiveState(
        rng.uniform(0.3, 3.0, count),
        rng.normal(0.0, u_scale, (count, law.n)),
        rng.uniform(0.3, 3.0, count),
        rng.uniform(-1.5, 1.5, count),
    )


def suite_collision(seed: int = 0, count: int = 10_000) -> list[dict]:
    rng = np.random.Generator(np.random.Philox(seed))
    out = []
    for n in (1, 2, 3):
        M = 5
        m = rng.integers(1, M + 1, count)
        m1 = rng.integers(1, M + 1, count)
        s = m + m1
        lo, hi = np.maximum(1, s - M), np.minimum(M, s - 1)
        mp = lo + np.floor(rng.random(count) * (hi - lo + 1)).astype(int)
        v = rng.normal(size=(count, n))
        v1 = rng.normal(size=(count, n))
        om = rng.normal(size=(count, n))
        om /= np.linalg.norm(om, axis=1, keepdims=True)
        flip = np.sum(om * (v - v1), 1) > 0
        om[flip] *= -1
        vp, vq = collide_arrays(m, m1, v, v1, mp, om)
        mq = s - mp
        P0 = m[:, None] * v + m1[:, None] * v1
        P1 = mp[:, None] * vp + mq[:, None] * vq
        E0 = m * np.sum(v**2, 1) + m1 * np.sum(v1**2, 1)
        E1 = mp * np.sum(vp**2, 1) + mq * np.sum(vq**2, 1)
        out.append(_rec(f"momentum n={n}", np.max(np.abs(P1 - P0)) / np.max(np.abs(P0)), 1e-12))
        out.append(_rec(f"energy n={n}", np.max(np.abs(E1 - E0) / E0), 1e-12))
        # inverse round trip and Jacobian on one collision
        p, q = Particle(int(m[0]), v[0]), Particle(int(m1[0]), v1[0])
        ch = CollisionChannel(int(mp[0]), tuple(om[0]))
        a, b = collide_forward(p, q, ch)
        c, d = collide_inverse(a, b, CollisionChannel(p.m, tuple(om[0])))
        err = max(np.max(np.abs(c.v - p.v)), np.max(np.abs(d.v - q.v)))
        out.append(_rec(f"inverse round trip n={n}", err, 1e-12))
        h = 1e-6
        J = np.zeros((2 * n, 2 * n))
        base = np.concatenate([a.v, b.v])
        for k in range(2 * n):
            e = np.zeros(2 * n)
            e[k] = h
            r1 = collide_arrays(a.m, b.m, (base + e)[:n], (base + e)[n:], p.m, -om[0])
            r0 = collide_arrays(a.m, b.m, (base - e)[:n], (base - e)[n:], p.m, -om[0])
            J[:, k] = (np.concatenate(r1) - np.concatenate(r0)) / (2 * h)
        ref = velocity_jacobian(p.m, q.m, ch.m_out, n)
        out.append(_rec(f"jacobian n={n}", abs(abs(np.linalg.det(J)) - ref) / ref, 1e-6))
    return out


def suite_thermo(seed: int = 0, count: int = 200) -> list[dict]:
    from . import thermo as th

    rng = np.random.Generator(np.random.Philox(seed))
    out = []
    for n, M in ((1, 3), (2, 2), (3, 4)):
        law = MassLaw.family(M, a=0.3, b=0.1, n=n)
        p = random_states(law, count, rng)
        H = th.hessian_sigma(law, p)
        a = th.entropic_from_prim(law, p).to_vector()
        k = a.shape[-1]
        Hfd = np.zeros_like(H)
        for j in range(k):
            st = 1e-5 * (1 + np.abs(a[:, j]))
            ap, am = a.copy(), a.copy()
            ap[:, j] += st
            am[:, j] -= st
            Hfd[:, :, j] = (
                th.conserved_vector(law, th.EntropicState.from_vector(ap))
                - th.conserved_vector(law, th.EntropicState.from_vector(am))
            ) / (2 * st[:, None])
        rel = np.max(np.abs(H - Hfd)) / np.max(np.abs(H))
        out.append(_rec(f"hessian vs finite differences n={n}", rel, 1e-6))
        try:
            np.linalg.cholesky(H)
            chol = True
        except np.linalg.LinAlgError:
            chol = False
        out.append(_rec(f"hessian positive definite n={n}", 0.0, 0.0, passed=chol))
        S1 = th.legendre_entropy(law, p)
        S2 = th.thermo_entropy(law, p)
        out.append(_rec(f"legendre entropy n={n}", np.max(np.abs(S1 - S2) / np.maximum(1, np.abs(S2))), 1e-10))
        X = th.onsager_X(law, p, 0.1).full()
        out.append(_rec(f"onsager symmetry n={n}", np.max(np.abs(X - np.swapaxes(X, -1, -2))), 0.0))
        Y = rng.normal(size=(count, n + 3, n))
        d, s = th.X_quadratic_form(law, p, 0.1, Y)
        out.append(_rec(f"onsager sum of squares n={n}", np.max(np.abs(d - s) / np.maximum(1, np.abs(s))), 1e-12))
        out.append(_rec(f"onsager nonnegative n={n}", -min(0.0, float(d.min())), 0.0))
        worst = 0.0
        for i in range(min(count, 50)):
            pi = p[i]
            R = th.reduced_form_matrix(law, pi)
            closed = th.principal_minors(law, pi)
            for r in range(R.shape[0]):
                num = np.linalg.det(R[: r + 1, : r + 1])
                ref = float(closed[r])
                worst = max(worst, abs(num - ref) / max(abs(ref), 1e-300))
        out.append(_rec(f"principal minors n={n}", worst, 1e-8))
    return out


def suite_kinetic(seed: int = 0) -> list[dict]:
    from . import kinetic as kn

    rng = np.random.Generator(np.random.Philox(seed))
    law = MassLaw.uniform(2, n=2)
    grid = kn.VelocityGrid(2, 6.0, 12)
    p = PrimitiveState(np.array(1.0), np.array([0.2, -0.1]), np.array(1.0), np.array(0.2))
    target = prim_to_cons(law, p).to_array()
    eq = kn.discrete_maxwellian(law, grid, target)
    out = [_rec("maxwellian moment match", np.max(np.abs(kn.raw_moments(eq) - target) / np.maximum(1, np.abs(target))), 1e-12)]
    st = eq.with_f(eq.f * (1 + 0.5 * rng.random(eq.f.shape)))
    Q, gain, _, ent = kn.q_bme_parts(st, Kernel())
    X = kn._features(law, grid)
    mom = np.abs(np.einsum("mk,mkd->d", Q, X)) / np.einsum("mk,mkd->d", np.abs(gain), np.abs(X))
    out.append(_rec("q_bme conservation", mom.max(), 1e-12))
    out.append(_rec("entropy production sign", ent, 0.0, passed=ent < 0))
    Qe, ge, _, _ = kn.q_bme_parts(eq, Kernel())
    out.append(_rec("equilibrium residual", np.abs(Qe).sum() / np.abs(ge).sum(), 1e-12))
    S = [kn.kinetic_entropy(st)]
    for _ in range(20):
        st = kn.bgk_step_homogeneous(st, 0.1, 1.0)
        S.append(kn.kinetic_entropy(st))
    out.append(_rec("bgk entropy monotone", max(0.0, float(np.max(np.diff(S)))), 1e-12))
    return out


SUITES = {"thermo": suite_thermo, "collision": suite_collision, "kinetic": suite_kinetic}
