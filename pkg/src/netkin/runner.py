"""Scenario configuration: validation, resolution and execution.

A scenario is a TOML document with a top-level ``model`` key and one block
named after the model::

    model = "sir"
    seed = 0

    [sir]
    beta = 0.1
    kinds = ["network", "reaction-diffusion"]
    [sir.kernel]
    x0 = 0.2
    alpha = 0.3

Missing optional keys are filled from ``DEFAULTS``; the fully resolved
document is what the run manifest records.
"""
from __future__ import annotations

import copy
import json
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .core import DiscreteNetwork, Kernel, PeriodicGrid1D, triangular_kernel
from .dialect import (
    DialectParams,
    dialect_law,
    interface_count,
    solve_burridge_local,
    solve_dialect_monokinetic,
    variance_decay_check,
)
from .epidemic import KINDS, SIRParams, SIRState, solve_sir
from .errors import ConfigError
from .io import export_csv, write_manifest, write_table
from .meanfield import (
    DiffusionKernel,
    DriftKernel,
    simulate_fokker_planck_particles,
    solve_characteristics,
    solve_monokinetic,
)
from .norms import NormsParams, norms_law, solve_norms_monokinetic, two_clique_network
from .particle import ParticleEnsemble, make_rng, simulate_master
from .stepping import Trajectory

__all__ = ["MODELS", "BUILTINS", "load_config", "builtin_config", "resolve_config",
           "run_scenario", "RunResult"]

MODELS = ("dialect", "norms", "sir", "particle-vs-meanfield")
BUILTINS = ("fig1", "dialect-variance", "dialect-coarsening", "norms-two-cliques",
            "particle-vs-meanfield")

REQUIRED = {
    "sir": ["beta", "kernel.x0", "kernel.alpha"],
    "dialect": ["alpha_exp", "gamma"],
    "norms": [],
    "particle-vs-meanfield": ["alpha_exp", "gamma"],
}

DEFAULTS = {
    "sir": {
        "kinds": ["network"], "D1": 1.0, "D2": 1.0, "sigma": 1.0, "dt": 0.01, "t_end": 5.0,
        "scheme": "euler", "u0": 1.0, "grid": {"n": 100},
        "v0": {"center": 0.5, "width": 0.02, "amplitude": 1.0},
    },
    "dialect": {
        "M": 2, "solver": "monokinetic", "variant": "nonlinear-diffusion", "dt": 0.01,
        "t_end": 1.0, "agents_per_site": 1, "grid": {"n": 100},
        "kernel": {"type": "constant", "value": 1.0}, "init": {"type": "random"},
    },
    "norms": {
        "M": 4, "J": 100, "dt": 0.01, "t_end": 10.0, "s0": 1.0,
        "network": {"type": "two-cliques", "size": 5, "inter": 0.01, "intra": 1.0},
        "init": {"type": "cliques"},
    },
    "particle-vs-meanfield": {
        "M": 2, "t_end": 0.5, "dt": 0.001, "agents": [100, 400, 1600], "seeds": 20,
        "grid": {"n": 20}, "kernel": {"type": "cosine", "amplitude": 1.0},
        "init": {"type": "sine", "amplitude": 0.3},
    },
}

DIALECT_SOLVERS = ("monokinetic", "characteristics", "boltzmann", "fokker-planck", "local")


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            # a different kernel/init type replaces the default block wholesale
            if "type" in v and v.get("type") != out[k].get("type"):
                out[k] = copy.deepcopy(v)
            else:
                out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _lookup(block: dict, dotted: str):
    cur = block
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(dotted)
        cur = cur[part]
    return cur


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        doc = doc.get("config", doc)
    else:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"TOML syntax error: {exc}"]) from None
    doc.setdefault("_base_dir", str(path.parent.resolve()))
    return doc


def builtin_config(name: str) -> dict:
    if name not in BUILTINS:
        raise ConfigError([f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTINS)}"])
    text = resources.files("netkin").joinpath("scenarios", f"{name}.toml").read_text()
    return tomllib.loads(text)


def resolve_config(doc: dict) -> dict:
    """Validate ``doc`` and fill defaults.  Raises ``ConfigError`` listing every problem."""
    problems = []
    model = doc.get("model")
    if model not in MODELS:
        raise ConfigError([f"'model' must be one of {', '.join(MODELS)} (got {model!r})"])
    blocks = [m for m in MODELS if m in doc]
    if blocks != [model]:
        problems.append(f"exactly one model block [{model}] expected, found {blocks or 'none'}")
        raise ConfigError(problems)
    block = doc[model]
    if not isinstance(block, dict):
        raise ConfigError([f"[{model}] must be a table"])
    for key in REQUIRED[model]:
        try:
            _lookup(block, key)
        except KeyError:
            problems.append(f"missing required key '{key}' in [{model}]")
    resolved = _merge(DEFAULTS[model], block)
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        problems.append("'seed' must be a nonnegative integer")

    def positive(key):
        try:
            val = _lookup(resolved, key)
        except KeyError:
            return
        if not isinstance(val, (int, float)) or val <= 0:
            problems.append(f"'{key}' must be positive (got {val!r})")

    for key in ("dt", "t_end"):
        positive(key)
    if model == "sir":
        bad = [k for k in resolved["kinds"] if k not in KINDS]
        if bad:
            problems.append(f"unknown SIR kinds {bad}")
        for key in ("beta", "D1", "D2"):
            val = resolved.get(key)
            if val is not None and (not isinstance(val, (int, float)) or val < 0):
                problems.append(f"'{key}' must be a nonnegative number")
    if model == "dialect" and resolved["solver"] not in DIALECT_SOLVERS:
        problems.append(f"'solver' must be one of {DIALECT_SOLVERS}")
    if model == "norms":
        net = resolved["network"]
        if net.get("type") not in ("two-cliques", "matrix", "csv"):
            problems.append("'network.type' must be two-cliques, matrix or csv")
        if net.get("type") == "matrix" and "weights" not in net:
            problems.append("missing required key 'network.weights' in [norms]")
        if net.get("type") == "csv":
            p = Path(net.get("path", ""))
            if not p.is_absolute():
                p = Path(doc.get("_base_dir", ".")) / p
            if not p.is_file():
                problems.append(f"network CSV not found: {p}")
    snaps = doc.get("snapshot_times")
    if snaps is not None and (not isinstance(snaps, list) or
                              any(not isinstance(t, (int, float)) for t in snaps)):
        problems.append("'snapshot_times' must be a list of numbers")
    if problems:
        raise ConfigError(problems)
    out = {k: v for k, v in doc.items() if k not in MODELS and not k.startswith("_")}
    out["seed"] = seed
    out[model] = resolved
    if "_base_dir" in doc:
        out["_base_dir"] = doc["_base_dir"]
    return out


@dataclass
class RunResult:
    outdir: Path
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    report: str = ""

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def check(self, name, passed, **detail):
        self.checks.append({"name": name, "passed": bool(passed), **detail})


def _snapshots(cfg, block, t_end, dt):
    if "snapshot_times" in cfg:
        return [float(t) for t in cfg["snapshot_times"]]
    every = block.get("snapshot_every")
    if every:
        k = int(round(t_end / every))
        return [i * every for i in range(k + 1)]
    return [0.0, float(t_end)]


def _build_kernel(opts: dict, grid: PeriodicGrid1D) -> Kernel:
    kind = opts.get("type", "triangle")
    if kind == "triangle":
        return triangular_kernel(grid, float(opts["x0"]), float(opts["alpha"]))
    if kind == "constant":
        return Kernel.constant(grid, float(opts.get("value", 1.0)))
    if kind == "cosine":
        a = float(opts.get("amplitude", 1.0))
        return Kernel.from_distance(grid, lambda d: 1.0 + a * np.cos(2 * np.pi * d))
    raise ConfigError([f"unknown kernel type {kind!r}"])


def _site_init(opts: dict, grid: PeriodicGrid1D, M: int, rng) -> np.ndarray:
    kind = opts.get("type", "random")
    if kind == "random":
        return rng.dirichlet(np.ones(M), size=grid.size)
    if kind == "sine":
        a = float(opts.get("amplitude", 0.3))
        x = grid.points[:, None]
        return 1.0 / M + a * np.sin(2 * np.pi * x + 2 * np.pi * np.arange(M)[None, :] / M)
    if kind == "vertex":
        V = np.zeros((grid.size, M))
        V[:, int(opts.get("index", 0))] = 1.0
        return V
    raise ConfigError([f"unknown init type {kind!r}"])


# ---------------------------------------------------------------- SIR


def _run_sir(cfg, res: RunResult):
    b = cfg["sir"]
    grid = PeriodicGrid1D(int(b["grid"]["n"]))
    kernel = triangular_kernel(grid, float(b["kernel"]["x0"]), float(b["kernel"]["alpha"]))
    x = grid.points
    v0 = b["v0"]
    init = SIRState(np.full(grid.n, float(b["u0"])),
                    v0["amplitude"] * np.exp(-0.5 * ((x - v0["center"]) / v0["width"]) ** 2))
    t_end, dt = float(b["t_end"]), float(b["dt"])
    wanted = cfg.get("snapshot_times", [1.0, 2.0, 3.0, 4.0, 5.0] if t_end == 5.0 else [t_end])
    n_steps = int(round(t_end / dt))
    every = [k * dt for k in range(n_steps + 1)]
    mass = {}
    for kind in b["kinds"]:
        params = SIRParams(kernel, float(b["beta"]), kind=kind, D1=float(b["D1"]),
                           D2=float(b["D2"]), sigma=float(b["sigma"]), dt=dt, t_end=t_end,
                           scheme=b["scheme"], snapshot_times=tuple(every))
        full = solve_sir(init, params)
        keep = [int(round(t / dt)) for t in wanted]
        traj = Trajectory(np.array(wanted, dtype=float), full.states[keep],
                          meta={"fields": ("u", "v", "r"), "x": x})
        tag = {"network": "network", "reaction-diffusion": "rd", "local": "local"}[kind]
        res.files.append(export_csv(traj, res.outdir / f"sir_{tag}.csv"))
        totals = full.states.sum(axis=1)
        cons = float(np.max(np.abs(totals - totals[0])))
        final = full.states[-1]
        mass[kind] = float(final[1].sum() + final[2].sum())
        res.summary[kind] = {"infected_plus_removed_sites_sum": mass[kind],
                             "max_conservation_error": cons,
                             "min_density": full.meta["min_density"]}
        if kind == "network":
            res.check("network: per-site conservation u+v+r (1e-10)", cons <= 1e-10, value=cons)
            du = float(np.max(np.diff(full.states[:, 0], axis=0)))
            res.check("network: u non-increasing (1e-12)", du <= 1e-12, value=du)
            bound = float(np.max(full.states[:, 0] + full.states[:, 1] - (init.u + init.v)))
            res.check("network: u+v <= u0+v0", bound <= 1e-12, value=bound)
    if "network" in mass and "reaction-diffusion" in mass:
        res.check("network infected+removed mass exceeds reaction-diffusion at t_end",
                  mass["network"] > mass["reaction-diffusion"],
                  network=mass["network"], rd=mass["reaction-diffusion"])


# ---------------------------------------------------------------- dialect


def _dialect_setup(b, rng):
    grid = PeriodicGrid1D(int(b["grid"]["n"]))
    kernel = _build_kernel(b["kernel"], grid)
    params = DialectParams(int(b["M"]), float(b["alpha_exp"]), float(b["gamma"]), kernel)
    return grid, kernel, params


def _agent_init(opts, grid, M, per_site, rng):
    if opts.get("type") == "mixed":
        pos = np.repeat(np.arange(grid.size), per_site)
        return ParticleEnsemble(grid, pos, rng.dirichlet(np.ones(M), size=pos.size))
    return ParticleEnsemble.on_sites(grid, per_site, _site_init(opts, grid, int(M), rng))


def _run_dialect(cfg, res: RunResult):
    b = cfg["dialect"]
    rng = make_rng(cfg["seed"])
    grid, kernel, params = _dialect_setup(b, rng)
    t_end, dt = float(b["t_end"]), float(b["dt"])
    snaps = _snapshots(cfg, b, t_end, dt)
    solver = b["solver"]
    M = params.M
    law = dialect_law(params)

    if solver in ("monokinetic", "local"):
        V0 = _site_init(b["init"], grid, M, rng)
        if solver == "monokinetic":
            traj = solve_dialect_monokinetic(params, V0, t_end, dt, b["variant"], snaps)
        else:
            C_sigma = b.get("sigma", 0.1)
            kap = b.get("kappa", float(np.mean(params.kappa)))
            traj = solve_burridge_local(params, V0, float(C_sigma), float(kap), t_end, dt,
                                        b.get("variant", "burridge"), snaps)
        res.files.append(export_csv(traj, res.outdir / "dialect_field.csv"))
        counts = [interface_count(V) for V in traj.states]
        vertex_dist = float(np.max(1.0 - traj.states[-1].max(axis=1)))
        res.summary.update({"interface_counts": counts, "final_max_distance_to_vertex": vertex_dist,
                            "times": traj.times.tolist()})
        res.check("states remain in the simplex (1e-9)",
                  np.all(traj.states >= -1e-9) and
                  np.max(np.abs(traj.states.sum(axis=-1) - 1)) <= 1e-9)
        res.check("interface count non-increasing", all(np.diff(counts) <= 0), counts=counts)
        if b.get("expect_vertices"):
            res.check("every site within 1e-3 of a vertex at t_end", vertex_dist <= 1e-3,
                      value=vertex_dist)
        return

    ens = _agent_init(b["init"], grid, M, int(b["agents_per_site"]), rng)
    if solver == "characteristics":
        traj = solve_characteristics(ens, DriftKernel(kernel, law), t_end, dt, snaps)
    elif solver == "fokker-planck":
        traj = simulate_fokker_planck_particles(ens, DriftKernel(kernel, law),
                                                DiffusionKernel(kernel, law), t_end, dt,
                                                cfg["seed"], snaps)
    else:
        # Boltzmann runs in interaction time; snapshots are given in rescaled time
        scale = (1.0 + params.gamma) / params.gamma
        traj = simulate_master(ens, law, kernel, t_end * scale, cfg["seed"],
                               [t * scale for t in snaps])
        traj.times = traj.times / scale
    res.files.append(export_csv(traj, res.outdir / "dialect_particles.csv"))
    eta = traj.observables["eta"]
    res.check("spatial marginal stationary (exact)", np.all(eta == eta[0]))
    states = traj.states
    res.check("states remain in the simplex (1e-9)",
              np.all(states >= -1e-9) and np.max(np.abs(states.sum(-1) - 1)) <= 1e-9)
    kappa0 = float(np.min(params.kappa[params.rho > 0]))
    rep = variance_decay_check(traj, kappa0)
    res.report = ("Quadratic variation against exp(-2 kappa0 t) V(0), "
                  f"kappa0 = {kappa0:.6g}\n" + rep.table() + "\n")
    res.summary["variance"] = rep.rows
    res.summary["kappa0"] = kappa0
    write_table(res.outdir / "variance.csv", ["t", "quadratic_variation", "bound", "pass"],
                [[r["t"], r["V"], "" if r["bound"] is None else r["bound"], str(r["pass"])]
                 for r in rep.rows])
    res.files.append(res.outdir / "variance.csv")
    if solver == "characteristics":
        res.check("variance decay V(t) <= exp(-2 kappa0 t) V(0) (5%)", rep.passed)


# ---------------------------------------------------------------- norms


def _norms_network(b, base_dir):
    net = b["network"]
    if net["type"] == "two-cliques":
        return two_clique_network(int(net["size"]), float(net["inter"]), float(net.get("intra", 1.0)))
    if net["type"] == "matrix":
        w = np.asarray(net["weights"], dtype=float)
    else:
        p = Path(net["path"])
        if not p.is_absolute():
            p = Path(base_dir) / p
        w = np.loadtxt(p, delimiter=",", ndmin=2)
    return DiscreteNetwork.of_size(w.shape[0]), w


def _run_norms(cfg, res: RunResult):
    b = cfg["norms"]
    rng = make_rng(cfg["seed"])
    network, w = _norms_network(b, cfg.get("_base_dir", "."))
    M = int(b["M"])
    params = NormsParams(network, w, M=M, h=1.0 / float(b["J"]), rho=b.get("rho"), s0=b["s0"])
    n = network.size
    init = b["init"]
    if "V0" in b:
        V0 = np.asarray(b["V0"], dtype=float)
    elif init["type"] == "cliques":
        # clique c favours representation c, remaining weight spread at random
        size = int(b["network"].get("size", n // 2))
        V0 = 0.5 * rng.dirichlet(np.ones(M), size=n)
        V0[np.arange(n), (np.arange(n) >= size).astype(int)] += 0.5
    else:
        V0 = rng.dirichlet(np.ones(M), size=n)
    t_end, dt = float(b["t_end"]), float(b["dt"])
    snaps = _snapshots(cfg, b, t_end, dt)
    traj = solve_norms_monokinetic(params, V0, t_end, dt, snaps)
    res.files.append(export_csv(traj, res.outdir / "norms_nodes.csv"))
    final = traj.states[-1]
    winners = final.argmax(axis=1).tolist()
    res.summary.update({"final_argmax": winners, "final_max_weight": final.max(axis=1).tolist()})
    res.check("node weights remain in the simplex (1e-9)",
              np.all(traj.states >= -1e-9) and np.max(np.abs(traj.states.sum(-1) - 1)) <= 1e-9)
    if b["network"]["type"] == "two-cliques":
        size = int(b["network"]["size"])
        means = [final[:size].mean(axis=0), final[size:].mean(axis=0)]
        dist = [float(1.0 - m.max()) for m in means]
        distinct = int(means[0].argmax()) != int(means[1].argmax())
        res.summary["clique_distance_to_vertex"] = dist
        res.check("cliques settle on distinct representations", distinct)
        res.check("each clique mean within 0.05 of a vertex", max(dist) <= 0.05, value=max(dist))


# ---------------------------------------------------------------- particle vs mean field


def _run_particle_vs_meanfield(cfg, res: RunResult):
    b = cfg["particle-vs-meanfield"]
    rng = make_rng(cfg["seed"])
    grid, kernel, params = _dialect_setup(b, rng)
    law = dialect_law(params)
    V0 = _site_init(b["init"], grid, params.M, rng)
    t_end, dt = float(b["t_end"]), float(b["dt"])
    mono = solve_monokinetic(params.measure, V0, DriftKernel(kernel, law), t_end, dt)
    target = mono.states[-1]
    scale = (1.0 + params.gamma) / params.gamma
    rows, errs = [], []
    for N in b["agents"]:
        per_site = int(N) // grid.size
        e = []
        for k in range(int(b["seeds"])):
            ens = ParticleEnsemble.on_sites(grid, per_site, V0)
            traj = simulate_master(ens, law, kernel, t_end * scale, cfg["seed"] + k,
                                   [t_end * scale])
            e.append(float(np.sqrt(np.mean((traj.observables["mean_state"][-1] - target) ** 2))))
        errs.append(float(np.mean(e)))
        rows.append([int(N), errs[-1], float(np.std(e, ddof=1) / np.sqrt(len(e))) if len(e) > 1 else 0.0])
    write_table(res.outdir / "propagation_of_chaos.csv", ["N", "rms_error", "standard_error"], rows)
    res.files.append(res.outdir / "propagation_of_chaos.csv")
    ratio = errs[-1] / errs[0]
    expected = (b["agents"][0] / b["agents"][-1]) ** 0.5
    res.summary.update({"agents": list(b["agents"]), "rms_error": errs, "ratio": ratio,
                        "expected_ratio": expected})
    res.check("RMS error ratio consistent with N^-1/2 (within factor 3)",
              expected / 3 <= ratio <= expected * 3, ratio=ratio, expected=expected)


_RUNNERS = {
    "sir": _run_sir,
    "dialect": _run_dialect,
    "norms": _run_norms,
    "particle-vs-meanfield": _run_particle_vs_meanfield,
}


def run_scenario(config: dict, outdir, seed: int | None = None) -> RunResult:
    """Resolve, run and write outputs.  Returns the result with invariant checks."""
    cfg = resolve_config(config)
    if seed is not None:
        cfg["seed"] = int(seed)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    res = RunResult(outdir)
    start = time.perf_counter()
    _RUNNERS[cfg["model"]](cfg, res)
    elapsed = time.perf_counter() - start
    manifest_cfg = {k: v for k, v in cfg.items() if not k.startswith("_")}
    res.files.append(write_manifest(outdir / "manifest.json", manifest_cfg, cfg["seed"], __version__))
    summary = {"model": cfg["model"], "seed": cfg["seed"], "ok": res.ok, "checks": res.checks,
               "results": res.summary}
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    lines = [f"model: {cfg['model']}  seed: {cfg['seed']}  runtime: {elapsed:.2f}s", ""]
    lines += [f"[{'pass' if c['passed'] else 'FAIL'}] {c['name']}" for c in res.checks]
    if res.report:
        lines += ["", res.report]
    (outdir / "report.txt").write_text("\n".join(lines) + "\n")
    res.files += [outdir / "summary.json", outdir / "report.txt"]
    return res
