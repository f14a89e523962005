"""Dialect model: memory vectors on the simplex updated by hearing variants.

An agent with memory ``v`` utters variant ``i`` with probability
``p_i(v) = v_i**alpha / sum_j v_j**alpha``.  A listener with memory ``v``
who hears variant ``i`` moves to ``(v + gamma e_i) / (1 + gamma)``.

In rescaled time (units of ``(1 + gamma) / gamma`` interaction times) the
monokinetic limit reads

    dV/dt = -kappa (V - p(V)) + int w(x, y) rho(y) (p(V(y)) - p(V(x))) dy

with ``kappa(x) = int w(x, y) rho(y) dy``.  The linear variant replaces the
nonlocal term by ``int w rho (V(y) - V(x)) dy``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Kernel,
    PeriodicGrid1D,
    check_simplex,
    grid_laplacian,
    kernel_mass,
    project_simplex,
)
from .errors import DegenerateStateError, NumericalError
from .particle import InteractionLaw
from .stepping import Trajectory, integrate

__all__ = [
    "DialectParams",
    "DialectLaw",
    "choice_probabilities",
    "choice_jacobian",
    "invert_p",
    "invert_monotone_map",
    "hearing_collision",
    "pre_collision",
    "dialect_law",
    "solve_dialect_monokinetic",
    "solve_burridge_local",
    "interface_count",
    "total_variation",
    "VarianceReport",
    "variance_decay_check",
]

LEAVE_TOL = 1e-6
FROZEN_DENSITY = 1e-12


def choice_probabilities(v, alpha_exp: float) -> np.ndarray:
    """``p_i(v) = v_i**alpha / sum_j v_j**alpha`` along the last axis."""
    v = np.asarray(v, dtype=float)
    pw = np.power(np.clip(v, 0.0, None), alpha_exp)
    total = pw.sum(axis=-1, keepdims=True)
    if np.any(total <= 0.0) or not np.all(np.isfinite(total)):
        raise DegenerateStateError("choice probabilities undefined for a zero memory vector")
    return pw / total


def choice_jacobian(v, alpha_exp: float) -> np.ndarray:
    """``dp_i/dv_j = alpha v_j**(alpha-1) (delta_ij - p_i) / sum_k v_k**alpha``."""
    v = np.clip(np.asarray(v, dtype=float), 0.0, None)
    p = choice_probabilities(v, alpha_exp)
    total = np.power(v, alpha_exp).sum(axis=-1, keepdims=True)
    col = alpha_exp * np.power(v, alpha_exp - 1.0) / total
    eye = np.eye(v.shape[-1])
    return (eye - p[..., :, None]) * col[..., None, :]


def invert_p(q, alpha_exp: float) -> np.ndarray:
    """Memory vector whose choice probabilities are ``q``.

    Closed form ``v_i proportional to q_i**(1/alpha)``.
    """
    q = np.asarray(q, dtype=float)
    return project_simplex(np.power(np.clip(q, 0.0, None), 1.0 / alpha_exp))


def invert_monotone_map(p_map, q, v0=None, max_iter: int = 100, tol: float = 1e-12,
                        fd_step: float = 1e-7) -> np.ndarray:
    """Solve ``p_map(v) = q`` on the simplex by damped Newton iteration.

    The Jacobian is taken by finite differences within the tangent space of
    the simplex.  Used for choice maps without a closed-form inverse.
    """
    q = np.asarray(q, dtype=float)
    m = q.size
    v = np.full(m, 1.0 / m) if v0 is None else np.array(v0, dtype=float)
    # orthonormal basis of {sum = 0}
    basis = np.linalg.svd(np.eye(m) - 1.0 / m)[0][:, : m - 1]
    for _ in range(max_iter):
        r = p_map(v) - q
        if np.max(np.abs(r)) <= tol:
            return v
        J = np.empty((m, m - 1))
        for k in range(m - 1):
            J[:, k] = (p_map(v + fd_step * basis[:, k]) - p_map(v - fd_step * basis[:, k])) / (2 * fd_step)
        step = basis @ np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        norm0 = np.linalg.norm(r)
        while lam > 1e-6:
            trial = v + lam * step
            if np.all(trial >= 0) and np.linalg.norm(p_map(trial) - q) < norm0:
                break
            lam *= 0.5
        v = project_simplex(np.clip(v + lam * step, 0.0, None))
    raise NumericalError(f"inversion did not converge in {max_iter} iterations")


def hearing_collision(v, i: int, gamma: float) -> np.ndarray:
    """Post-collision memory ``v / (1 + gamma) + gamma e_i / (1 + gamma)``."""
    v = np.asarray(v, dtype=float)
    if not 0 <= i < v.shape[-1]:
        raise IndexError(f"variant index {i} out of range for M={v.shape[-1]}")
    out = v / (1.0 + gamma)
    out[..., i] += gamma / (1.0 + gamma)
    return out


def pre_collision(v_post, i: int, gamma: float) -> np.ndarray:
    """Inverse of :func:`hearing_collision`: ``(1 + gamma) v' - gamma e_i``."""
    v = (1.0 + gamma) * np.asarray(v_post, dtype=float)
    if not 0 <= i < v.shape[-1]:
        raise IndexError(f"variant index {i} out of range for M={v.shape[-1]}")
    v[..., i] -= gamma
    return v


@dataclass
class DialectParams:
    M: int
    alpha_exp: float
    gamma: float
    kernel: Kernel
    rho: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha_exp < 1:
            raise ValueError("alpha_exp must be >= 1 for an invertible choice map")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.M < 2:
            raise ValueError("need at least two variants")
        if self.rho is None:
            self.rho = np.ones(self.kernel.space.size)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.kernel.space.size,) or np.any(self.rho < 0):
            raise ValueError("rho must be a nonnegative per-site array")

    @property
    def kappa(self) -> np.ndarray:
        return kernel_mass(self.kernel, self.rho)

    @property
    def measure(self) -> np.ndarray:
        """Spatial measure ``rho dx`` as per-site weights."""
        return self.kernel.space.quadrature_weights * self.rho


class DialectLaw(InteractionLaw):
    """Active speaker utters a variant; only the listener's memory moves."""

    active_passive = True
    scale_exponent = 1.0

    def __init__(self, M: int, alpha_exp: float, gamma: float):
        self.M = self.state_dim = M
        self.alpha_exp = alpha_exp
        self.gamma = gamma
        self.g = gamma / (1.0 + gamma)
        self.eps = self.g

    def sample(self, active, passive, rng):
        pw = np.power(active, self.alpha_exp)
        cum = np.cumsum(pw)
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        i = min(i, self.M - 1)
        b = -self.g * passive
        b[i] += self.g
        return None, b, i

    def mean_jumps(self, active, passive):
        p = choice_probabilities(active, self.alpha_exp)
        eb = self.g * (p - np.asarray(passive, dtype=float))
        return np.zeros_like(eb), eb

    def second_moments(self, active, passive):
        p = choice_probabilities(active, self.alpha_exp)
        v = np.asarray(passive, dtype=float)
        p, v = np.broadcast_arrays(p, v)
        # sum_k p_k (e_k - v)(e_k - v)^T
        cov = (np.einsum("...i,ij->...ij", p, np.eye(self.M))
               - p[..., :, None] * v[..., None, :] - v[..., :, None] * p[..., None, :]
               + v[..., :, None] * v[..., None, :])
        ebb = self.g ** 2 * cov
        return np.zeros_like(ebb), ebb

    def interaction_field(self, W, weights, states):
        cw = W * weights[None, :]
        return cw @ choice_probabilities(states, self.alpha_exp) - cw.sum(axis=1)[:, None] * states

    def diffusion_field(self, W, weights, states):
        cw = W * weights[None, :]
        pbar = cw @ choice_probabilities(states, self.alpha_exp)
        kap = cw.sum(axis=1)
        v = states
        cov = (np.einsum("ni,ij->nij", pbar, np.eye(self.M))
               - pbar[:, :, None] * v[:, None, :] - v[:, :, None] * pbar[:, None, :]
               + kap[:, None, None] * v[:, :, None] * v[:, None, :])
        return 0.5 * self.g * cov

    def admissible(self, state, tol=1e-12):
        return state.min() >= -tol and abs(state.sum() - 1.0) <= tol

    def project(self, states):
        return project_simplex(states)


def dialect_law(params: DialectParams) -> DialectLaw:
    return DialectLaw(params.M, params.alpha_exp, params.gamma)


def _check_field(V, tol, t=None):
    if not np.all(np.isfinite(V)):
        raise NumericalError("non-finite dialect state", t=t)
    if V.min() < -tol or np.max(np.abs(V.sum(axis=-1) - 1.0)) > tol:
        raise NumericalError("dialect state left the simplex", t=t)


def solve_dialect_monokinetic(params: DialectParams, V0, t_end: float, dt: float,
                              variant: str = "nonlinear-diffusion", snapshot_times=None,
                              method: str = "rk4") -> Trajectory:
    """Nonlocal reaction-diffusion form of the monokinetic dialect dynamics.

    Sites with vanishing density are frozen.  States are projected back onto
    the simplex after each step; a drift beyond ``1e-6`` is an error.
    """
    if variant not in ("nonlinear-diffusion", "linear-diffusion"):
        raise ValueError(f"unknown variant {variant!r}")
    V0 = np.asarray(V0, dtype=float)
    _check_field(V0, 1e-9)
    alpha = params.alpha_exp
    cw = params.kernel.matrix * params.measure[None, :]
    kappa = cw.sum(axis=1)
    active = (params.rho > FROZEN_DENSITY)[:, None]

    def rhs(t, V):
        p = choice_probabilities(V, alpha)
        smoothed = cw @ (p if variant == "nonlinear-diffusion" else V)
        if variant == "nonlinear-diffusion":
            dV = smoothed - kappa[:, None] * V
        else:
            dV = -kappa[:, None] * (V - p) + smoothed - kappa[:, None] * V
        return np.where(active, dV, 0.0)

    def post(t, V):
        _check_field(V, LEAVE_TOL, t)
        return project_simplex(V)

    times, states = integrate(rhs, V0, t_end, dt, snapshot_times, method=method, post_step=post)
    return Trajectory(times, states, meta={"solver": f"dialect-{variant}", "dt": dt})


def solve_burridge_local(params: DialectParams, V0, sigma: float, kappa: float,
                         t_end: float, dt: float, variant: str = "burridge",
                         snapshot_times=None) -> Trajectory:
    """Local reaction-diffusion limits on the periodic grid (RK4 in time).

    ``burridge``:    dV/dt = -kappa (V - p(V)) + sigma^2/2 Lap p(V)
    ``allen-cahn``:  dV/dt = -kappa (V - p(V)) + sigma^2/2 Lap V
    ``p-form``:      the Burridge equation written for ``P = p(V)``; the
                     returned states are mapped back to memories.
    """
    grid = params.kernel.space
    if not isinstance(grid, PeriodicGrid1D):
        raise ValueError("local limits need a periodic grid")
    if variant not in ("burridge", "allen-cahn", "p-form"):
        raise ValueError(f"unknown variant {variant!r}")
    alpha = params.alpha_exp
    D = 0.5 * sigma ** 2
    V0 = np.asarray(V0, dtype=float)
    _check_field(V0, 1e-9)

    def rhs(t, V):
        p = choice_probabilities(V, alpha)
        diffused = grid_laplacian(p if variant == "burridge" else V, grid)
        return -kappa * (V - p) + D * diffused

    def rhs_p(t, P):
        V = invert_p(P, alpha)
        drive = -kappa * (V - P) + D * grid_laplacian(P, grid)
        return np.einsum("nij,nj->ni", choice_jacobian(V, alpha), drive)

    def post(t, V):
        try:
            _check_field(V, LEAVE_TOL, t)
        except NumericalError as exc:
            limit = grid.h ** 2 / (2.0 * sigma ** 2) if sigma > 0 else float("inf")
            raise NumericalError(f"{exc}; explicit diffusion is stable for roughly "
                                 f"dt <= {limit:.3g} times a safety factor") from None
        return project_simplex(V)

    if variant == "p-form":
        times, P = integrate(rhs_p, choice_probabilities(V0, alpha), t_end, dt,
                             snapshot_times, post_step=post)
        states = invert_p(P, alpha)
        return Trajectory(times, states, observables={"P": P},
                          meta={"solver": "local-p-form", "dt": dt})
    times, states = integrate(rhs, V0, t_end, dt, snapshot_times, post_step=post)
    return Trajectory(times, states, meta={"solver": f"local-{variant}", "dt": dt})


def interface_count(V, M: int | None = None) -> int:
    """Sign changes of ``V_1 - 1/M`` around the periodic grid."""
    V = np.asarray(V, dtype=float)
    M = V.shape[-1] if M is None else M
    s = np.sign(V[:, 0] - 1.0 / M)
    s = s[s != 0]
    if s.size == 0:
        return 0
    return int(np.count_nonzero(s != np.roll(s, 1)))


def total_variation(V) -> float:
    """Periodic total variation in ``x``, summed over components."""
    V = np.asarray(V, dtype=float)
    return float(np.abs(np.roll(V, -1, axis=0) - V).sum())


@dataclass
class VarianceReport:
    rows: list = field(default_factory=list)
    kappa0: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def table(self) -> str:
        lines = [f"{'t':>8} {'V(t)':>14} {'bound':>14}  status"]
        for r in self.rows:
            bound = "-" if r["bound"] is None else f"{r['bound']:14.6e}"
            lines.append(f"{r['t']:8.3f} {r['V']:14.6e} {bound:>14}  "
                         f"{'pass' if r['pass'] else 'FAIL'}")
        return "\n".join(lines)


def variance_decay_check(trajectory: Trajectory, kappa0: float, tol: float = 0.05,
                         se=None) -> VarianceReport:
    """Compare quadratic variation against ``exp(-2 kappa0 t) V(0)``.

    With ``kappa0 = 0`` only monotone non-increase is checked.  ``se`` (per
    snapshot standard errors) widens the bound by ``3 se`` for stochastic
    runs.
    """
    try:
        qv = np.asarray(trajectory.observables["quadratic_variation"], dtype=float)
    except KeyError:
        raise ValueError("trajectory carries no quadratic-variation observable") from None
    t = trajectory.times
    allowance = np.zeros_like(qv) if se is None else 3.0 * np.asarray(se, dtype=float)
    report = VarianceReport(kappa0=kappa0)
    for k in range(len(t)):
        if kappa0 > 0:
            bound = float(np.exp(-2.0 * kappa0 * (t[k] - t[0])) * qv[0])
            ok = qv[k] <= bound * (1.0 + tol) + allowance[k] + 1e-15
        else:
            bound = None
            ok = k == 0 or qv[k] <= qv[k - 1] * (1.0 + 1e-12) + allowance[k] + 1e-15
        report.rows.append({"t": float(t[k]), "V": float(qv[k]), "bound": bound, "pass": bool(ok)})
    return report
