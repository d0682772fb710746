import json
import math

import numpy as np
import pytest

from kinex import Kernel, MassLaw, experiments, kinetic
from kinex._backend import available
from kinex.collision import CollisionChannel, Particle, allowed_channels, collide_forward
from kinex.errors import ConvergenceError, DomainError, StepError, ValidationError
from kinex.fluid import Grid1D, PrimitiveState, prim_to_cons


def _prim(n, rho=1.0, u=None, Theta=1.0, beta=0.0):
    u = np.zeros(n) if u is None else np.asarray(u, float)
    return PrimitiveState(np.array(rho), u, np.array(Theta), np.array(beta))


# ------------------------------------------------------------ velocity grid


def test_grid_nodes_are_midpoints():
    g = kinetic.VelocityGrid(1, 4.0, 8)
    assert g.h == pytest.approx(1.0)
    np.testing.assert_allclose(g.nodes1, np.arange(-3.5, 4.0, 1.0))
    assert g.size == 8 and g.weight == pytest.approx(1.0)


def test_grid_rejects_odd_without_flag():
    with pytest.raises(ValidationError):
        kinetic.VelocityGrid(2, 5.0, 9)
    assert kinetic.VelocityGrid(2, 5.0, 9, allow_odd=True).size == 81


def test_state_shape_and_finiteness():
    law = MassLaw.uniform(2, n=1)
    g = kinetic.VelocityGrid(1, 4.0, 8)
    with pytest.raises(ValidationError):
        kinetic.KineticState(law, g, np.ones((3, 8)))
    f = np.ones((2, 8))
    f[0, 0] = np.nan
    with pytest.raises(DomainError):
        kinetic.KineticState(law, g, f)


# ------------------------------------------------------ discrete Maxwellian


@pytest.mark.parametrize("n,M", [(1, 1), (1, 3), (2, 2), (3, 2)])
def test_discrete_maxwellian_matches_moments(n, M):
    law = MassLaw.family(M, a=0.2, n=n)
    g = kinetic.VelocityGrid(n, 7.0, 24 if n < 3 else 12)
    p = _prim(n, 1.3, np.linspace(0.2, -0.3, n), 0.9, 0.4 if M > 1 else 0.0)
    target = prim_to_cons(law, p).to_array()
    st = kinetic.discrete_maxwellian(law, g, target)
    raw = kinetic.raw_moments(st)
    assert np.max(np.abs(raw - target) / np.maximum(1, np.abs(target))) <= 1e-12
    back = kinetic.macro_fields(st)
    assert float(back.Theta) == pytest.approx(0.9, rel=1e-10)


def test_maxwellian_close_to_continuum_on_fine_grid():
    law = MassLaw.uniform(1, n=1)
    g = kinetic.VelocityGrid(1, 10.0, 200)
    st = kinetic.maxwellian_from_prim(law, g, _prim(1, 1.0, [0.3], 1.5))
    v = g.nodes[:, 0]
    ref = np.exp(-((v - 0.3) ** 2) / 3.0) / math.sqrt(3.0 * math.pi)
    assert np.max(np.abs(st.f[0] - ref)) < 1e-8


def test_maxwellian_fails_on_coarse_grid():
    law = MassLaw.uniform(2, n=1)
    g = kinetic.VelocityGrid(1, 1.0, 4)
    target = prim_to_cons(law, _prim(1, 1.0, [0.0], 50.0)).to_array()
    with pytest.raises((ConvergenceError, DomainError)):
        kinetic.discrete_maxwellian(law, g, target)


def test_macro_from_moments_names_failure():
    law = MassLaw.uniform(2, n=1)
    with pytest.raises(DomainError, match="N/rho"):
        kinetic.macro_from_moments(law, np.array([1.0, 1.0, 0.0, 1.0]))
    with pytest.raises(DomainError, match="rho > 0"):
        kinetic.macro_from_moments(law, np.array([1.0, -1.0, 0.0, 1.0]))


# ----------------------------------------------------- angular quadrature


@pytest.mark.parametrize("n,measure", [(1, 1.0), (2, math.pi), (3, 2 * math.pi)])
def test_half_sphere_weights(n, measure):
    q = kinetic.half_sphere_quadrature(n, 16)
    assert q[:, 3].sum() == pytest.approx(measure, rel=1e-14)
    assert np.all(q[:, 0] > 0)
    np.testing.assert_allclose(np.sum(q[:, :3] ** 2, 1), 1.0, atol=1e-14)


# ------------------------------------------------ weak-form brute-force oracle


def _lagrange3(t):
    """Quadratic stencil around the nearest node; generic Lagrange form."""
    k0 = int(np.rint(t))
    pts = [k0 - 1, k0, k0 + 1]
    w = []
    for j in range(3):
        num = 1.0
        for l in range(3):
            if l != j:
                num *= (t - pts[l]) / (pts[j] - pts[l])
        w.append(num)
    return pts, w


def _oracle(law, grid, f, kernel, n_omega):
    """Net event rates and their stencils, one collision at a time."""
    n, Nv, h = law.n, grid.N_v, grid.h
    M = law.M_max
    F = f * np.array([law.gamma[a] / (a + 1) ** (n / 2) for a in range(M)])[:, None]
    nodes = grid.nodes
    quad = kinetic.half_sphere_quadrature(n, n_omega)
    events = []
    for a in range(M):
        for b in range(M):
            m, m1 = a + 1, b + 1
            pref = 0.25 * h ** (2 * n) * (m * m1) ** (n / 2)
            for mp in allowed_channels(law, m, m1):
                mq = m + m1 - mp
                for i in range(grid.size):
                    for j in range(grid.size):
                        if F[a, i] * F[b, j] == 0 and n > 1:
                            continue  # sparse support: no full stencil can be hit
                        v, v1 = nodes[i], nodes[j]
                        g = v - v1
                        gn = float(np.linalg.norm(g))
                        gh = g / gn if gn > 0 else np.eye(n)[0]
                        e1 = np.array([-gh[1], gh[0]]) if n == 2 else None
                        B = kernel.C_B * (m * m1 / (m + m1) * gn * gn) ** kernel.exponent if kernel.exponent else kernel.C_B
                        for c, s1, _, wk in quad:
                            om = -c * gh + (s1 * e1 if n == 2 else 0.0)
                            om = om / np.linalg.norm(om)
                            pa, pb = collide_forward(Particle(m, v), Particle(m1, v1), CollisionChannel(mp, tuple(om)))
                            sten = []
                            for part, mass in ((pa, mp), (pb, mq)):
                                per_dim = [_lagrange3((part.v[d] - grid.vmin) / h) for d in range(n)]
                                if any(not (1 <= pts[1] <= Nv - 2) for pts, _ in per_dim):
                                    sten = None
                                    break
                                for combo in np.ndindex(*(3,) * n):
                                    flat = 0
                                    w = 1.0
                                    for d in range(n):
                                        flat = flat * Nv + per_dim[d][0][combo[d]]
                                        w *= per_dim[d][1][combo[d]]
                                    sten.append((mass - 1, flat, w))
                            if sten is None:
                                continue
                            G = 1.0
                            for s_m, s_k, s_w in sten:
                                if s_w == 0.0:
                                    continue
                                if F[s_m, s_k] == 0:
                                    G = 0.0
                                    break
                                G *= F[s_m, s_k] ** s_w
                            R = pref * wk * B * (F[a, i] * F[b, j] - G)
                            events.append((R, (a, i), (b, j), sten))
    return events


def _weak(events, phi):
    tot = 0.0
    for R, (a, i), (b, j), sten in events:
        tot += R * (sum(w * phi[m, k] for m, k, w in sten) - phi[a, i] - phi[b, j])
    return tot


@pytest.mark.parametrize("kernel", [Kernel(), Kernel("power_law", 1.0, 0.3)], ids=["maxwell", "power"])
def test_weak_form_oracle_full_grid_1d(kernel):
    law = MassLaw.family(2, a=0.5, b=0.2, n=1)
    grid = kinetic.VelocityGrid(1, 4.0, 10)
    st = experiments.random_positive_f(law, grid, seed=3)
    Q = kinetic.q_bme(st, kernel)
    events = _oracle(law, grid, st.f, kernel, 16)
    rng = np.random.default_rng(0)
    for _ in range(20):
        phi = rng.normal(size=st.f.shape)
        lhs = grid.weight * float(np.sum(Q * phi))
        rhs = _weak(events, phi)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))
    # delta test functions recover every node
    dense = np.zeros_like(st.f)
    for R, (a, i), (b, j), sten in events:
        dense[a, i] -= R
        dense[b, j] -= R
        for m, k, w in sten:
            dense[m, k] += R * w
    np.testing.assert_allclose(grid.weight * Q, dense, rtol=0, atol=1e-12 * np.abs(dense).max())


def test_weak_form_oracle_sparse_support_2d():
    law = MassLaw.uniform(2, n=2)
    grid = kinetic.VelocityGrid(2, 4.0, 8)
    f = np.zeros((2, grid.size))
    support = [3 * 8 + 3, 3 * 8 + 4, 4 * 8 + 3, 4 * 8 + 5]
    f[0, support] = [0.7, 0.4, 0.9, 0.3]
    f[1, support] = [0.2, 0.5, 0.6, 0.8]
    st = kinetic.KineticState(law, grid, f)
    Q = kinetic.q_bme(st, Kernel(), 8)
    events = _oracle(law, grid, f, Kernel(), 8)
    rng = np.random.default_rng(1)
    for _ in range(20):
        phi = rng.normal(size=f.shape)
        lhs = grid.weight * float(np.sum(Q * phi))
        rhs = _weak(events, phi)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


# ------------------------------------------------------ operator properties


def test_equilibrium_is_fixed_point():
    law = MassLaw.family(2, a=0.3, n=2)
    for N_v in (16, 32):
        grid = kinetic.VelocityGrid(2, 6.0, N_v)
        eq = kinetic.maxwellian_from_prim(law, grid, _prim(2, 1.0, [0.2, 0.0], 1.0, 0.1))
        Q, gain, _, _ = kinetic.q_bme_parts(eq, Kernel(), 8)
        assert np.abs(Q).sum() / np.abs(gain).sum() <= 1e-12


def test_entropy_production_matches_finite_difference():
    law = MassLaw.uniform(2, n=1)
    grid = kinetic.VelocityGrid(1, 5.0, 16)
    st = experiments.random_positive_f(law, grid, seed=4)
    Q = kinetic.q_bme(st, Kernel())
    ent = kinetic.entropy_production(st, Kernel())
    d = 1e-6
    fd = (kinetic.kinetic_entropy(st.with_f(st.f + d * Q)) - kinetic.kinetic_entropy(st.with_f(st.f - d * Q))) / (2 * d)
    assert ent < 0
    assert fd == pytest.approx(ent, rel=1e-4)


def test_entropy_production_requires_positive_f():
    law = MassLaw.uniform(2, n=1)
    grid = kinetic.VelocityGrid(1, 5.0, 8)
    f = np.ones((2, 8))
    f[0, 3] = 0.0
    with pytest.raises(DomainError):
        kinetic.entropy_production(kinetic.KineticState(law, grid, f), Kernel())


def test_zero_outside_support_gives_gain_only_inside_grid():
    law = MassLaw.uniform(1, n=1)
    grid = kinetic.VelocityGrid(1, 4.0, 8)
    f = np.zeros((1, 8))
    st = kinetic.KineticState(law, grid, f)
    assert np.all(kinetic.q_bme(st, Kernel()) == 0.0)


@pytest.mark.skipif("cython" not in available(), reason="compiled kernel not built")
def test_backends_agree():
    law = MassLaw.family(3, a=0.3, n=2)
    grid = kinetic.VelocityGrid(2, 5.0, 10)
    st = experiments.random_positive_f(law, grid, seed=9)
    qp, gp, _, ep = kinetic.q_bme_parts(st, Kernel("power_law", 2.0, 0.5), 8, backend="python")
    qc, gc, _, ec = kinetic.q_bme_parts(st, Kernel("power_law", 2.0, 0.5), 8, backend="cython")
    scale = np.abs(gp).max()
    assert np.max(np.abs(qp - qc)) <= 1e-12 * scale
    assert np.max(np.abs(gp - gc)) <= 1e-12 * scale
    assert ec == pytest.approx(ep, rel=1e-12)


def test_work_limit(monkeypatch):
    law = MassLaw.uniform(2, n=2)
    grid = kinetic.VelocityGrid(2, 5.0, 16)
    monkeypatch.setattr(kinetic, "MAX_WORK", 10)
    st = kinetic.maxwellian_from_prim(law, grid, _prim(2))
    with pytest.raises(ValidationError, match="predicted work"):
        kinetic.q_bme(st, Kernel())


# --------------------------------------------------------------------- BGK


def test_linearized_bgk_kernel_dimension():
    law = MassLaw.uniform(2, n=1)
    grid = kinetic.VelocityGrid(1, 5.0, 8)
    eq = kinetic.maxwellian_from_prim(law, grid, _prim(1, 1.0, [0.0], 1.0, 0.2))
    L = kinetic.linearized_bgk_matrix(law, grid, eq.f)
    sv = np.linalg.svd(L, compute_uv=False)
    assert int(np.sum(sv < 1e-10 * sv.max())) == 4


def test_bgk_step_conserves_and_relaxes():
    law = MassLaw.family(3, a=0.3, n=2)
    grid = kinetic.VelocityGrid(2, 6.0, 16)
    st = experiments.random_positive_f(law, grid, seed=2)
    raw0 = kinetic.raw_moments(st)
    for _ in range(30):
        st = kinetic.bgk_step_homogeneous(st, 0.5, 1.0)
    np.testing.assert_allclose(kinetic.raw_moments(st), raw0, rtol=1e-11, atol=1e-12)
    M = kinetic.discrete_maxwellian(law, grid, raw0).f
    assert np.max(np.abs(st.f - M)) < 1e-5 * M.max()


def test_bgkme_step_conserves_and_checks_cfl():
    law = MassLaw.uniform(2, n=1)
    vg = kinetic.VelocityGrid(1, 5.0, 12)
    sg = Grid1D.uniform(32, 1.0)
    x = sg.x
    p = PrimitiveState(1 + 0.2 * np.sin(2 * np.pi * x), np.zeros((32, 1)), np.ones(32), 0.1 * np.cos(2 * np.pi * x))
    st = kinetic.discrete_maxwellian(law, vg, prim_to_cons(law, p).to_array())
    tot0 = kinetic.raw_moments(st).sum(0)
    for scheme in ("upwind", "minmod", "spectral"):
        s2 = kinetic.bgkme_step_1d(st, 0.005, 0.1, sg, scheme=scheme)
        np.testing.assert_allclose(kinetic.raw_moments(s2).sum(0), tot0, rtol=1e-12, atol=1e-12)
    with pytest.raises(StepError):
        kinetic.bgkme_step_1d(st, 0.1, 0.1, sg)


def test_advect_spectral_exact_shift():
    C = 16
    x = np.arange(C) / C
    f = np.sin(2 * np.pi * x)[:, None, None] * np.ones((1, 1, 1))
    out = kinetic.advect(f, np.array([1.0]), 0.25, 1.0 / C, "spectral")
    np.testing.assert_allclose(out[:, 0, 0], np.sin(2 * np.pi * (x - 0.25)), atol=1e-13)


# ---------------------------------------------------------------- snapshots


def test_write_snapshot(tmp_path):
    law = MassLaw.uniform(2, n=2)
    grid = kinetic.VelocityGrid(2, 3.0, 4)
    st = kinetic.maxwellian_from_prim(law, grid, _prim(2))
    csv_path, side = kinetic.write_snapshot(st, tmp_path / "snap.csv", {"time": 0.5})
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "cell_index,m,v_index_1,v_index_2,f_value"
    assert len(lines) == 1 + 2 * 16
    first = lines[1].split(",")
    assert float(first[-1]) == st.f[0, 0]
    meta = json.loads(side.read_text())
    assert meta["time"] == 0.5 and meta["grid"]["N_v"] == 4
