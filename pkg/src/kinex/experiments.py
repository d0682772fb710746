"""Experiment drivers shared by the CLI and the acceptance tests.

Every driver takes plain parameters, returns a dict with a ``tables``
entry (name -> (header, rows)) and a ``summary`` entry of scalars.
"""

from __future__ import annotations

import numpy as np

from . import dsmc, fluid, kinetic, thermo, verify
from .collision import CollisionChannel, Kernel, Particle, collide_forward
from .fluid import Grid1D, PrimitiveState, cons_to_prim, prim_to_cons
from .mass_law import MassLaw, beta_from_inv_mass_mean, _normalized


def _prim_rows(x, p: PrimitiveState):
    rows = []
    for i in range(len(x)):
        rows.append([float(x[i]), float(p.rho[i]), *map(float, p.u[i]), float(p.Theta[i]), float(p.beta[i])])
    return rows


def _prim_header(n):
    return ["x", "rho"] + [f"u_{d + 1}" for d in range(n)] + ["Theta", "beta"]


# ------------------------------------------------------------------ collide


def collide_demo(law: MassLaw, m, m1, v, v1, m_out, omega=None, seed=0):
    v, v1 = np.asarray(v, float), np.asarray(v1, float)
    if omega is None:
        g = v - v1
        if np.linalg.norm(g) == 0:
            omega = np.eye(law.n)[0]
        else:
            omega = dsmc.sample_omega(dsmc.make_rng(seed), g, law.n)
    a, b = collide_forward(Particle(m, v), Particle(m1, v1), CollisionChannel(m_out, tuple(omega)))
    P0, P1 = m * v + m1 * v1, a.m * a.v + b.m * b.v
    E0 = m * v @ v + m1 * v1 @ v1
    E1 = a.m * a.v @ a.v + b.m * b.v @ b.v
    header = ["particle", "m"] + [f"v_{d + 1}" for d in range(law.n)]
    rows = [
        ["in_1", m, *v.tolist()],
        ["in_2", m1, *v1.tolist()],
        ["out_1", a.m, *a.v.tolist()],
        ["out_2", b.m, *b.v.tolist()],
    ]
    return {
        "tables": {"collision": (header, rows)},
        "summary": {
            "omega": list(map(float, omega)),
            "momentum_error": float(np.max(np.abs(P1 - P0))),
            "energy_error": float(abs(E1 - E0)),
        },
    }


# ---------------------------------------------------------------- kinetic


def qeval(law, kernel, v_max, N_v, n_omega, amplitude, seed, rho=1.0, Theta=1.0, beta=0.0):
    grid = kinetic.VelocityGrid(law.n, v_max, N_v)
    p = PrimitiveState(np.array(rho), np.zeros(law.n), np.array(Theta), np.array(beta))
    eq = kinetic.maxwellian_from_prim(law, grid, p)
    rng = dsmc.make_rng(seed)
    st = eq.with_f(eq.f * (1.0 + amplitude * rng.random(eq.f.shape)))
    Q, gain, loss, ent = kinetic.q_bme_parts(st, kernel, n_omega)
    X = kinetic._features(law, grid)
    mom = np.einsum("mk,mkd->d", Q, X) * grid.weight
    scale = np.einsum("mk,mkd->d", np.abs(gain), np.abs(X)) * grid.weight
    Qe, ge, _, _ = kinetic.q_bme_parts(eq, kernel, n_omega)
    idx = np.array(np.unravel_index(np.arange(grid.size), (N_v,) * law.n)).T
    rows = []
    for a in range(law.M_max):
        for k in range(grid.size):
            rows.append([a + 1, *idx[k].tolist(), float(st.f[a, k]), float(Q[a, k])])
    header = ["m"] + [f"v_index_{d + 1}" for d in range(law.n)] + ["f", "Q"]
    return {
        "tables": {"q_bme": (header, rows)},
        "summary": {
            "max_relative_moment": float(np.max(np.abs(mom) / scale)),
            "entropy_production": ent,
            "equilibrium_residual": float(np.abs(Qe).sum() / np.abs(ge).sum()),
        },
    }


def random_positive_f(law, grid, seed, amplitude=0.5):
    """Positive, clearly non-Maxwellian state: a bumpy mixture of two Maxwellians."""
    rng = dsmc.make_rng(seed)
    n = law.n
    out = 0
    for _ in range(2):
        p = PrimitiveState(
            np.array(rng.uniform(0.5, 1.5)),
            rng.normal(0, 0.5, n),
            np.array(rng.uniform(0.6, 1.4)),
            np.array(rng.uniform(-0.5, 0.5)),
        )
        out = out + kinetic.maxwellian_from_prim(law, grid, p).f
    return kinetic.KineticState(law, grid, out * (1.0 + amplitude * rng.random(out.shape)))


def relax_bgk(law, v_max, N_v, eps, dt, steps, seed, amplitude=0.5):
    grid = kinetic.VelocityGrid(law.n, v_max, N_v)
    st = random_positive_f(law, grid, seed, amplitude)
    n = law.n
    rows = []
    for k in range(steps + 1):
        if k:
            st = kinetic.bgk_step_homogeneous(st, dt, eps)
        raw = kinetic.raw_moments(st)
        rows.append([k, k * dt, kinetic.kinetic_entropy(st), *map(float, raw)])
    S = np.array([r[2] for r in rows])
    header = ["step", "time", "S", "N", "rho"] + [f"P_{d + 1}" for d in range(n)] + ["E"]
    return {
        "tables": {"entropy": (header, rows)},
        "summary": {"max_entropy_increase": float(max(0.0, np.max(np.diff(S)))), "S_final": float(S[-1])},
    }


# ------------------------------------------------------------------- dsmc


def relax_dsmc(law, kernel, particles, steps, dt_fraction, seed, init_masses="uniform", Theta_x=2.0, Theta_y=0.5, every=1):
    """Relax an anisotropic start; ``init_masses`` is ``uniform`` or ``single`` (all mass 2)."""
    n = law.n
    rng = dsmc.make_rng(seed)
    if init_masses == "single":
        m = np.full(particles, min(2, law.M_max))
    else:
        m = rng.integers(1, law.M_max + 1, particles)
    scale = np.sqrt(np.array([Theta_x] + [Theta_y] * (n - 1)))
    v = rng.standard_normal((particles, n)) * scale / np.sqrt(m)[:, None]
    v -= v.mean(0)
    ens = dsmc.ParticleEnsemble(m, v, 1.0 / particles, seed, 0.0, rng)
    maj = dsmc.MajorantConfig.build(law, kernel, ens)
    dt = dt_fraction / ((particles - 1) * maj.rate(ens.weight, n))
    T0 = ens.totals()
    ens, rows = dsmc.run_relaxation(ens, law, kernel, dt, steps, every, maj)
    drift = np.abs(ens.totals() - T0) / np.maximum(np.abs(T0), 1e-300)
    counts = dsmc.mass_histogram(ens, law.M_max)
    beta = beta_from_inv_mass_mean(law, counts.sum() / float((counts * law.masses).sum())) if law.M_max > 1 else 0.0
    p, _ = _normalized(law, beta)
    frac = p / law.masses
    frac /= frac.sum()
    header = ["time", "rho"] + [f"u_{d + 1}" for d in range(n)] + ["Theta", "beta", "S_estimate"]
    header += [f"count_{k + 1}" for k in range(law.M_max)]
    return {
        "tables": {"timeseries": (header, rows)},
        "summary": {
            "dt": dt,
            "max_conservation_drift": float(np.max(drift[1:])),
            "final_counts": counts.tolist(),
            "expected_fractions": frac.tolist(),
        },
        "ensemble": ens,
    }


# ------------------------------------------------------------------ fluid


def initial_condition(law, name, x, length):
    n = law.n
    tp = 2 * np.pi * x / length
    z = np.zeros((x.size, n))
    if name == "sod":
        left = x < 0.5 * length
        rho = np.where(left, 1.0, 0.125)
        pt = np.where(left, 1.0, 0.1)
        beta = np.zeros_like(x)
        inv = fluid.inv_mass_means(law, beta)[0]
        return PrimitiveState(rho, z, pt / (rho * inv), beta)
    if name == "beta_contact":
        left = (x > 0.25 * length) & (x < 0.75 * length)
        rho = np.where(left, 1.0, 0.5)
        beta = np.where(left, 0.8, -0.4)
        inv = fluid.inv_mass_means(law, beta)[0]
        u = z.copy()
        u[:, 0] = 0.7
        return PrimitiveState(rho, u, 1.0 / (rho * inv), beta)
    if name == "smooth":
        u = z.copy()
        u[:, 0] = 0.2 * np.cos(tp)
        if n > 1:
            u[:, 1] = 0.1 * np.sin(tp)
        return PrimitiveState(1 + 0.2 * np.sin(tp), u, 1 + 0.2 * np.cos(tp + 1), 0.3 * np.sin(tp + 2))
    raise ValueError(f"unknown initial condition {name!r}")


def fluid_run(law, cells, length, bc, cfl, t_end, order, initial, eps=0.0):
    grid = Grid1D.uniform(cells, length, bc)
    prim = initial_condition(law, initial, grid.x, length)
    U = prim_to_cons(law, prim).to_array()
    t = 0.0
    steps = 0
    while t < t_end * (1 - 1e-14):
        dt = min(fluid.stable_dt(law, U, grid, cfl, eps), t_end - t)
        U = fluid.nsme_step(law, U, grid, dt, eps, order, cfl, check=False)
        t += dt
        steps += 1
    p = cons_to_prim(law, U)
    return {
        "tables": {"fields": (_prim_header(law.n), _prim_rows(grid.x, p))},
        "summary": {"steps": steps, "t": t},
        "prim": p,
        "grid": grid,
    }


def chapman_enskog_error(law, eps, cells=64, N_v=20, v_max=7.0, dt=2e-4, t_end=0.1, length=1.0, ref_dt=2e-4):
    """Macro-field discrepancy between BGK kinetic and NSME solutions at ``t_end``.

    Returns ``(error, per_field, kinetic_prim, nsme_prim, x)``; the error is
    the largest RMS difference over ``rho, u, Theta, beta``.
    """
    grid = Grid1D.uniform(cells, length)
    vg = kinetic.VelocityGrid(law.n, v_max, N_v)
    U0 = prim_to_cons(law, initial_condition(law, "smooth", grid.x, length)).to_array()
    st = kinetic.discrete_maxwellian(law, vg, U0)
    steps = int(round(t_end / dt))
    a = None
    for _ in range(steps):
        st, a = kinetic.bgkme_step_1d(st, t_end / steps, eps, grid, scheme="spectral", params=a, return_params=True)
    pk = kinetic.macro_fields(st)
    pn = cons_to_prim(law, fluid.nsme_solve_spectral(law, U0, length, eps, t_end, ref_dt))

    def rms(a):
        return float(np.sqrt(np.mean(a**2)))

    per = {
        "rho": rms(pk.rho - pn.rho),
        "u": rms(pk.u - pn.u),
        "Theta": rms(pk.Theta - pn.Theta),
        "beta": rms(pk.beta - pn.beta),
    }
    return max(per.values()), per, pk, pn, grid.x


def chapman_enskog(law, eps, cells, N_v, v_max, dt, t_end):
    rows = []
    errs = []
    for e in (eps, 0.5 * eps):
        err, per, *_ = chapman_enskog_error(law, e, cells, N_v, v_max, dt, t_end)
        errs.append(err)
        rows.append([e, err, per["rho"], per["u"], per["Theta"], per["beta"]])
    return {
        "tables": {"errors": (["eps", "error", "rho", "u", "Theta", "beta"], rows)},
        "summary": {"ratio": errs[0] / errs[1]},
    }


def entropy_rate(law, cells, eps, length=1.0, initial="smooth"):
    """Semi-discrete ``d/dt int S dx = dx sum_i A_i . rhs_i`` on the NSME scheme."""
    grid = Grid1D.uniform(cells, length)
    p = initial_condition(law, initial, grid.x, length)
    U = prim_to_cons(law, p).to_array()
    a = thermo.to_fluid_order(thermo.entropic_from_prim(law, p).to_vector())
    return grid.dx * float(np.sum(a * fluid.nsme_rhs(law, U, grid, eps)))


def dissipation_integral(law, eps, cells=4096, length=1.0, initial="smooth"):
    """``int D dx`` with spectrally exact gradients; a reference for :func:`entropy_rate`."""
    grid = Grid1D.uniform(cells, length)
    p = initial_condition(law, initial, grid.x, length)
    n = law.n

    def d(f):
        return fluid._dx_spectral(f, length)

    gc = np.zeros((cells, n))
    gt = np.zeros((cells, n))
    gc[:, 0] = d(fluid.population_potential_chi(law, p))
    gt[:, 0] = d(p.Theta)
    sig = fluid.slab_sigma(d(p.u))
    return grid.dx * float(np.sum(thermo.dissipation_rate(law, p, gc, gt, sig, eps)))


def total_entropy_history(law, cells, eps, t_end, cfl=0.45, length=1.0, initial="smooth"):
    """``int S dx`` after every NSME step."""
    grid = Grid1D.uniform(cells, length)
    U = prim_to_cons(law, initial_condition(law, initial, grid.x, length)).to_array()
    out = [grid.dx * float(np.sum(thermo.legendre_entropy(law, U)))]
    t = 0.0
    while t < t_end * (1 - 1e-14):
        dt = min(fluid.stable_dt(law, U, grid, cfl, eps), t_end - t)
        U = fluid.nsme_step(law, U, grid, dt, eps, 2, cfl, check=False)
        t += dt
        out.append(grid.dx * float(np.sum(thermo.legendre_entropy(law, U))))
    return np.asarray(out)


def thermo_verify(seed, samples):
    recs = verify.suite_thermo(seed, samples)
    rows = [[r["name"], int(r["passed"]), r["value"], r["tol"]] for r in recs]
    return {
        "tables": {"checks": (["check", "passed", "value", "tol"], rows)},
        "summary": {"all_passed": all(r["passed"] for r in recs), "checks": recs},
    }
