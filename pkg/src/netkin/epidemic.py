"""Network-structured SIR model and its reaction-diffusion relatives.

Three model kinds share one state layout (susceptible ``u``, infected ``v``,
removed ``r`` per site):

``network``
    ``u_t = -u int w(x, y) v(y) dy``, ``v_t = -u_t - beta v``, ``r_t = beta v``.
    Only the infected population enters the nonlocal term.
``reaction-diffusion``
    ``u_t = -alpha u v + D1 Delta_w u``, ``v_t = alpha u v + D2 Delta_w v - beta v``
    with ``alpha(x) = int w(x, y) dy``.
``local``
    ``u_t = -alpha u v - u D Delta v``, ``v_t = alpha u v + u D Delta v - beta v``
    with the grid Laplacian and ``D = sigma**2 / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    Kernel,
    PeriodicGrid1D,
    grid_laplacian,
    kernel_mass,
    nonlocal_laplacian,
    triangular_kernel,
)
from .errors import DimensionError, NumericalError
from .stepping import Trajectory, integrate

__all__ = [
    "SIRState",
    "SIRParams",
    "KINDS",
    "sir_rhs",
    "network_rhs_rd_form",
    "solve_sir",
    "fig1_scenario",
    "PositivityReport",
    "positivity_violation_check",
]

KINDS = ("network", "reaction-diffusion", "local")
NEG_SLACK = 1e-9


@dataclass
class SIRState:
    u: np.ndarray
    v: np.ndarray
    r: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.r = np.zeros_like(self.u) if self.r is None else np.asarray(self.r, dtype=float)
        if not (self.u.shape == self.v.shape == self.r.shape) or self.u.ndim != 1:
            raise DimensionError("u, v, r must be 1-d arrays of equal length")

    def stack(self) -> np.ndarray:
        return np.stack([self.u, self.v, self.r])

    @classmethod
    def unstack(cls, y) -> "SIRState":
        return cls(y[0].copy(), y[1].copy(), y[2].copy())

    @property
    def total(self) -> np.ndarray:
        return self.u + self.v + self.r


@dataclass
class SIRParams:
    kernel: Kernel
    beta: float
    kind: str = "network"
    D1: float = 1.0
    D2: float = 1.0
    sigma: float = 1.0
    dt: float = 0.01
    t_end: float = 5.0
    scheme: str = "euler"
    snapshot_times: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.beta < 0 or self.D1 < 0 or self.D2 < 0:
            raise ValueError("beta, D1, D2 must be nonnegative")
        if self.kind == "local" and not isinstance(self.kernel.space, PeriodicGrid1D):
            raise ValueError("local kind needs a periodic grid")


def _infection_pressure(kernel, v):
    # int w(x, y) v(y) dy
    return kernel.matrix @ (kernel.space.quadrature_weights * v)


def sir_rhs(state: SIRState | np.ndarray, params: SIRParams) -> np.ndarray:
    """Time derivative ``(u_t, v_t, r_t)`` stacked as a ``(3, n)`` array."""
    y = state.stack() if isinstance(state, SIRState) else np.asarray(state, dtype=float)
    n = params.kernel.space.size
    if y.shape != (3, n):
        raise DimensionError(f"state of shape {y.shape} does not match {n} sites")
    u, v = y[0], y[1]
    kern = params.kernel
    if params.kind == "network":
        infection = u * _infection_pressure(kern, v)
        du = -infection
        dv = infection - params.beta * v
    else:
        alpha = kernel_mass(kern)
        if params.kind == "reaction-diffusion":
            reaction = alpha * u * v
            du = -reaction + params.D1 * nonlocal_laplacian(kern, u)
            dv = reaction + params.D2 * nonlocal_laplacian(kern, v) - params.beta * v
        else:
            spread = u * (0.5 * params.sigma ** 2) * grid_laplacian(v, kern.space)
            du = -alpha * u * v - spread
            dv = alpha * u * v + spread - params.beta * v
    return np.stack([du, dv, params.beta * v])


def network_rhs_rd_form(state: SIRState, params: SIRParams) -> np.ndarray:
    """Network model written as ``u_t = -alpha u v - u Delta_w v``."""
    alpha = kernel_mass(params.kernel)
    lap = nonlocal_laplacian(params.kernel, state.v)
    du = -alpha * state.u * state.v - state.u * lap
    return np.stack([du, -du - params.beta * state.v, params.beta * state.v])


def solve_sir(init: SIRState, params: SIRParams) -> Trajectory:
    """Fixed-step integration (forward Euler unless ``params.scheme='rk4'``).

    Negative densities below ``-1e-9`` abort network and reaction-diffusion
    runs; for the local kind they are recorded in ``meta['min_density']``.
    """
    if np.any(init.stack() < 0):
        raise ValueError("initial densities must be nonnegative")
    lowest = [float(init.stack().min())]

    def post(t, y):
        low = float(y[:2].min())
        if low < -NEG_SLACK:
            if params.kind != "local":
                raise NumericalError(f"negative density {low:.3g} in {params.kind} model", t=t)
            lowest[0] = min(lowest[0], low)
        return y

    snaps = params.snapshot_times
    if snaps is None:
        snaps = [0.0, params.t_end]
    times, states = integrate(lambda t, y: sir_rhs(y, params), init.stack(), params.t_end,
                              params.dt, snaps, method=params.scheme, post_step=post)
    return Trajectory(times, states, meta={"kind": params.kind, "min_density": lowest[0],
                                          "fields": ("u", "v", "r")})


def fig1_scenario(n: int = 100, width: float = 0.02, amplitude: float = 1.0,
                  D: float = 1.0) -> tuple[SIRState, SIRParams, SIRParams]:
    """Triangular kernel ``0.3 (0.2 - |x - y|)_+`` on the periodic unit grid,
    ``u0 = 1``, a Gaussian infected peak at ``x = 0.5``, ``beta = 0.1``,
    Euler steps of 0.01 and snapshots at ``t = 1..5``.
    """
    grid = PeriodicGrid1D(n)
    kernel = triangular_kernel(grid, x0=0.2, alpha=0.3)
    x = grid.points
    v0 = amplitude * np.exp(-0.5 * ((x - 0.5) / width) ** 2)
    init = SIRState(np.ones(n), v0, np.zeros(n))
    net = SIRParams(kernel, beta=0.1, kind="network", dt=0.01, t_end=5.0,
                    snapshot_times=(1.0, 2.0, 3.0, 4.0, 5.0))
    rd = replace(net, kind="reaction-diffusion", D1=D, D2=D)
    return init, net, rd


@dataclass
class PositivityReport:
    flagged: np.ndarray
    du: np.ndarray

    @property
    def any(self) -> bool:
        return bool(self.flagged.any())

    @property
    def max_du(self) -> float:
        return float(self.du.max())


def positivity_violation_check(state: SIRState, params: SIRParams) -> PositivityReport:
    """Sites where the local model lets the susceptibles grow.

    That happens where ``D Delta v < -alpha v``, i.e. ``u_t > 0``.
    """
    if params.kind != "local":
        raise ValueError("positivity check applies to the local model kind only")
    alpha = kernel_mass(params.kernel)
    lap = 0.5 * params.sigma ** 2 * grid_laplacian(state.v, params.kernel.space)
    du = sir_rhs(state, params)[0]
    flagged = (lap < -alpha * state.v) & (state.u > 0)
    return PositivityReport(flagged, du)
