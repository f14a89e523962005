"""Acceptance criteria 1 to 9, one test each.

Every test records a pass/fail line with its measured numbers; the lines are
printed in the "acceptance criteria" section at the end of the pytest run.
"""
import time
from dataclasses import replace

import numpy as np
from scipy import stats

from netkin.core import (
    DiscreteNetwork,
    Kernel,
    PeriodicGrid1D,
    check_simplex,
    local_limit_coefficient,
    triangular_kernel,
)
from netkin.dialect import (
    DialectLaw,
    DialectParams,
    solve_burridge_local,
    solve_dialect_monokinetic,
)
from netkin.epidemic import (
    SIRParams,
    SIRState,
    fig1_scenario,
    network_rhs_rd_form,
    positivity_violation_check,
    sir_rhs,
    solve_sir,
)
from netkin.norms import NormsParams, solve_norms_monokinetic
from netkin.particle import ParticleEnsemble, simulate_master
from netkin.runner import builtin_config, run_scenario


def _timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


def _checks(res):
    return {c["name"]: c for c in res.checks}


def test_1_network_vs_reaction_diffusion(acceptance):
    def run():
        init, net, rd = fig1_scenario()
        dense = tuple(np.round(np.arange(501) * 0.01, 10))
        return init, solve_sir(init, replace(net, snapshot_times=dense)), solve_sir(init, rd)

    (init, net, rd), elapsed = _timed(run)
    infected = lambda traj: traj.states[-1][1].sum() + traj.states[-1][2].sum()
    mass_net, mass_rd = infected(net), infected(rd)
    du = float(np.max(np.diff(net.states[:, 0], axis=0)))
    cons = float(np.max(np.abs(net.states.sum(axis=1) - init.total)))
    ok = mass_net > mass_rd and du <= 1e-12 and cons <= 1e-10 and elapsed < 5
    acceptance(1, ok, f"v+r network {mass_net:.6g} > rd {mass_rd:.6g}; max du {du:.2e}; "
                      f"conservation {cons:.2e}; {elapsed:.2f}s")
    assert mass_net > mass_rd
    assert du <= 1e-12
    assert cons <= 1e-10
    assert elapsed < 5


def test_2_homogeneous_sir(acceptance):
    def run():
        kernel = triangular_kernel(PeriodicGrid1D(100), 0.2, 0.3)
        init = SIRState(np.ones(100), np.full(100, 0.01))
        return solve_sir(init, SIRParams(kernel, 0.1, t_end=5.0, dt=0.01, scheme="rk4"))

    traj, elapsed = _timed(run)
    alpha, beta, dt = 0.012, 0.1, 1e-4

    def f(y):
        return np.array([-alpha * y[0] * y[1], alpha * y[0] * y[1] - beta * y[1]])

    y = np.array([1.0, 0.01])
    for _ in range(50_000):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    err = float(np.max(np.abs(traj.states[-1][:2] - y[:, None])))
    ok = err <= 1e-6 and elapsed < 5
    acceptance(2, ok, f"sup error {err:.2e} at t=5; {elapsed:.2f}s")
    assert err <= 1e-6
    assert elapsed < 5


def test_3_variance_decay(acceptance, tmp_path):
    cfg = builtin_config("dialect-variance")
    res, elapsed = _timed(run_scenario, cfg, tmp_path)
    rows = {r["t"]: r["V"] for r in res.summary["variance"]}
    n_agents = cfg["dialect"]["agents_per_site"] * cfg["dialect"]["grid"]["n"]
    ratios = {t: rows[t] / (np.exp(-2 * t) * rows[0.0]) for t in (0.5, 1.0, 2.0, 4.0)}
    worst = max(ratios.values())
    # w = 1 and rho = 1 give kappa0 = 1 up to the rounding of the quadrature sum
    unit_rate = abs(res.summary["kappa0"] - 1.0) <= 1e-12
    ok = unit_rate and n_agents == 500 and worst <= 1.05 and elapsed < 10
    acceptance(3, ok, f"N={n_agents}; max V(t)/(exp(-2t)V(0)) = {worst:.6f}; {elapsed:.2f}s")
    assert unit_rate and n_agents == 500
    assert worst <= 1.05
    assert elapsed < 10


def test_4_propagation_of_chaos(acceptance, tmp_path):
    cfg = builtin_config("particle-vs-meanfield")
    res, elapsed = _timed(run_scenario, cfg, tmp_path)
    errs, ratio = res.summary["rms_error"], res.summary["ratio"]
    lo, hi = 0.25 / 3, 0.25 * 3
    ok = errs[-1] < errs[0] and lo <= ratio <= hi and elapsed < 120
    acceptance(4, ok, f"RMS {' -> '.join(f'{e:.4g}' for e in errs)} for N={res.summary['agents']}; "
                      f"ratio {ratio:.3f} in [{lo:.3f}, {hi:.3f}]; {elapsed:.1f}s")
    assert cfg["particle-vs-meanfield"]["grid"]["n"] == 20
    assert cfg["particle-vs-meanfield"]["seeds"] == 20
    assert errs[-1] < errs[0]
    assert lo <= ratio <= hi
    assert elapsed < 120


def test_5_local_limit(acceptance):
    def run():
        grid = PeriodicGrid1D(400)
        x = grid.points
        V0 = np.column_stack([0.5 + 0.2 * np.sin(2 * np.pi * x), 0.5 - 0.2 * np.sin(2 * np.pi * x)])
        out = []
        for eps in (0.1, 0.05, 0.025):
            kernel = Kernel.convolution(grid, lambda s: np.clip(1 - np.abs(s), 0, None), eps)
            params = DialectParams(2, 2.0, 0.01, kernel)
            _, sigma = local_limit_coefficient(kernel)
            nonlocal_ = solve_dialect_monokinetic(params, V0, 1.0, 0.001).states[-1]
            local = solve_burridge_local(params, V0, sigma, float(np.mean(params.kappa)),
                                         1.0, 0.001).states[-1]
            out.append(float(np.max(np.abs(nonlocal_ - local))))
        return out

    gaps, elapsed = _timed(run)
    ok = gaps[0] > gaps[1] > gaps[2] and elapsed < 60
    acceptance(5, ok, f"sup gaps {', '.join(f'{g:.3e}' for g in gaps)} "
                      f"for eps 0.1, 0.05, 0.025; {elapsed:.2f}s")
    assert gaps[0] > gaps[1] > gaps[2]
    assert elapsed < 60


def test_6_coarsening(acceptance, tmp_path):
    cfg = builtin_config("dialect-coarsening")
    res, elapsed = _timed(run_scenario, cfg, tmp_path)
    b = cfg["dialect"]
    counts = res.summary["interface_counts"]
    dist = res.summary["final_max_distance_to_vertex"]
    setup = b["grid"]["n"] == 100 and b["M"] == 2 and b["alpha_exp"] == 2.0 and b["t_end"] == 200.0
    ok = setup and dist <= 1e-3 and all(np.diff(counts) <= 0) and elapsed < 30
    acceptance(6, ok, f"max distance to vertex {dist:.2e}; interfaces {counts[0]} -> {counts[-1]}; "
                      f"{elapsed:.2f}s")
    assert setup
    assert dist <= 1e-3
    assert all(np.diff(counts) <= 0)
    assert elapsed < 30


def test_7_norms_closed_form(acceptance):
    V0 = np.array([[0.2, 0.5, 0.2, 0.1]])
    e = np.array([0.0, 1.0, 0.0, 0.0])
    params = NormsParams(DiscreteNetwork.of_size(1), np.ones((1, 1)))
    traj, elapsed = _timed(solve_norms_monokinetic, params, V0, 10.0, 0.01, snapshot_times=[1, 10])
    err = max(float(np.max(np.abs(V[0] - (e + 1.0 / (1.0 + t) * (V0[0] - e)))))
              for t, V in zip(traj.times, traj.states))
    ok = err <= 1e-8 and elapsed < 1
    acceptance(7, ok, f"max error {err:.2e} at t in {{1, 10}}; {elapsed:.3f}s")
    assert err <= 1e-8
    assert elapsed < 1


def test_8_norms_segregation(acceptance, tmp_path):
    cfg = builtin_config("norms-two-cliques")
    res, elapsed = _timed(run_scenario, cfg, tmp_path)
    checks = _checks(res)
    dist = checks["each clique mean within 0.05 of a vertex"]["value"]
    distinct = checks["cliques settle on distinct representations"]["passed"]
    setup = cfg["norms"]["network"]["inter"] == 0.01 and cfg["norms"]["t_end"] == 100.0
    ok = setup and distinct and dist <= 0.05 and elapsed < 10
    acceptance(8, ok, f"distinct vertices {distinct}; max clique distance {dist:.4f}; {elapsed:.2f}s")
    assert setup and distinct
    assert dist <= 0.05
    assert elapsed < 10


def test_9_invariant_suite(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    grid = PeriodicGrid1D(4)
    pos = np.repeat(np.arange(4), 5)
    ens = ParticleEnsemble(grid, pos, rng.dirichlet(np.ones(3), size=pos.size))
    traj = simulate_master(ens, DialectLaw(3, 2.0, 0.1), Kernel.constant(grid), 600.0, seed=11,
                           record_events=True, snapshot_times=np.linspace(0, 600, 7))
    simplex = all(check_simplex(S, 1e-12) for S in traj.states)
    eta = traj.observables["eta"]
    stationary = bool(np.all(eta == eta[0]))

    waits = np.diff(np.concatenate([[0.0], traj.events["t"]]))[:10_000]
    p_value = float(stats.kstest(waits, "expon", args=(0, 1 / traj.meta["total_rate"])).pvalue)
    enough = waits.size == 10_000

    kernel = triangular_kernel(PeriodicGrid1D(100), 0.2, 0.3)
    state = SIRState(rng.random(100), rng.random(100), rng.random(100))
    params = SIRParams(kernel, 0.1)
    identity = float(np.max(np.abs(network_rhs_rd_form(state, params) - sir_rhs(state, params))))

    local = SIRParams(triangular_kernel(PeriodicGrid1D(200), 0.2, 0.3), 0.1, kind="local", sigma=0.1)
    x = local.kernel.space.points
    fired = positivity_violation_check(
        SIRState(np.ones(200), np.exp(-0.5 * ((x - 0.5) / 0.02) ** 2)), local).any
    elapsed = time.perf_counter() - start

    ok = (simplex and stationary and enough and p_value > 0.01 and identity <= 1e-12 and fired
          and elapsed < 60)
    acceptance(9, ok, f"simplex {simplex}; eta stationary {stationary}; KS p={p_value:.3f} "
                      f"on {waits.size} waits; SIR identity {identity:.1e}; detector fired {fired}; "
                      f"{elapsed:.2f}s")
    assert simplex and stationary
    assert enough and p_value > 0.01
    assert identity <= 1e-12
    assert fired
    assert elapsed < 60
