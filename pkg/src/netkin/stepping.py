"""Fixed-step explicit integrators and the trajectory container."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError

__all__ = ["Trajectory", "integrate", "snapshot_steps", "rk4_step", "euler_step"]


@dataclass
class Trajectory:
    """Snapshots of a simulation.

    ``states[k]`` is the full state at ``times[k]`` (a site field for the
    deterministic field solvers, an ``(N, s)`` array for particle runs).
    Particle runs additionally store the immutable ``positions`` and per-time
    ``observables``.
    """

    times: np.ndarray
    states: np.ndarray
    positions: np.ndarray | None = None
    observables: dict = field(default_factory=dict)
    events: dict | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[k], t, rtol=0, atol=1e-9 * max(1.0, abs(t))):
            raise KeyError(f"no snapshot at t={t}")
        return self.states[k]


def rk4_step(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(rhs, t, y, dt):
    return y + dt * rhs(t, y)


_STEPPERS = {"rk4": rk4_step, "euler": euler_step}


def snapshot_steps(t_end: float, dt: float, snapshot_times: Sequence[float] | None):
    """Step count and a ``{step index: requested time}`` map of snapshots.

    Snapshot times must be multiples of ``dt`` (up to rounding); the
    requested values are kept as timestamps so that ``0.3`` is not reported
    as ``3 * 0.1``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    n_steps = int(round(t_end / dt))
    if not np.isclose(n_steps * dt, t_end, rtol=1e-9, atol=0):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    if snapshot_times is None:
        snapshot_times = [0.0, t_end]
    steps = {}
    for t in snapshot_times:
        k = int(round(t / dt))
        if not np.isclose(k * dt, t, rtol=1e-9, atol=1e-12) or k < 0 or k > n_steps:
            raise ValueError(f"snapshot time {t} is not a step time in [0, {t_end}]")
        steps.setdefault(k, float(t))
    return n_steps, dict(sorted(steps.items()))


def integrate(rhs: Callable, y0, t_end: float, dt: float,
              snapshot_times: Sequence[float] | None = None, method: str = "rk4",
              post_step: Callable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``y' = rhs(t, y)`` with a fixed step.

    ``post_step(t, y)`` may return a repaired state (e.g. a projection) and
    may raise to abort.  Returns ``(times, states)`` at the snapshot times.
    """
    try:
        step = _STEPPERS[method]
    except KeyError:
        raise ValueError(f"unknown integrator {method!r}") from None
    n_steps, wanted = snapshot_steps(t_end, dt, snapshot_times)
    y = np.array(y0, dtype=float)
    times, states = [], []
    if 0 in wanted:
        times.append(wanted[0])
        states.append(y.copy())
    for k in range(1, n_steps + 1):
        t = (k - 1) * dt
        y = step(rhs, t, y, dt)
        if not np.all(np.isfinite(y)):
            raise NumericalError("non-finite state", t=k * dt)
        if post_step is not None:
            y = post_step(k * dt, y)
        if k in wanted:
            times.append(wanted[k])
            states.append(y.copy())
    return np.array(times), np.array(states)
