"""Exact stochastic simulation of the N-agent jump process.

Every ordered pair ``(i, j)``, ``i != j``, interacts at rate
``w(x_i, x_j) / N``.  At an interaction a jump ``(a, b)`` is drawn from the
law with ``i`` in the active and ``j`` in the passive role, and the states
become ``v_i + a`` and ``v_j + b``.  Positions never change, so pair rates are
fixed and the event sequence (times and pairs) can be drawn independently of
the states; only the jumps depend on them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiscreteNetwork, Kernel, PeriodicGrid1D
from .errors import DimensionError, StateViolationError, UnsupportedLawError
from .stepping import Trajectory

__all__ = [
    "InteractionLaw",
    "ParticleEnsemble",
    "simulate_master",
    "ensemble_observables",
    "dp_distance",
    "make_rng",
]

# above this many agents only observables are stored in snapshots
FULL_SNAPSHOT_LIMIT = 10_000
_CHUNK = 65_536


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; the seed is kept by callers for the trajectory record."""
    return np.random.Generator(np.random.PCG64(seed))


class InteractionLaw:
    """Joint law of the jumps ``(a, b)`` of an (active, passive) pair.

    Subclasses implement :meth:`sample` and, for the mean-field solvers,
    :meth:`mean_jumps` and :meth:`second_moments`.  Moment methods broadcast
    over leading axes of their arguments.  ``eps`` and ``scale_exponent``
    describe the small interaction parameter; mean-field kernels are divided
    by ``eps ** scale_exponent`` (time measured in units of ``1/eps**alpha``).
    """

    state_dim: int
    eps: float = 1.0
    scale_exponent: float = 1.0
    #: the active agent never moves (``a = 0`` almost surely)
    active_passive: bool = True

    def sample(self, active, passive, rng):
        """Return ``(a, b, action)``; ``a`` is ``None`` when identically zero."""
        raise NotImplementedError

    def mean_jumps(self, active, passive):
        raise UnsupportedLawError(f"{type(self).__name__} has no first-moment oracle")

    def second_moments(self, active, passive):
        raise UnsupportedLawError(f"{type(self).__name__} has no second-moment oracle")

    @property
    def time_scale(self) -> float:
        return self.eps ** self.scale_exponent

    def drift_pair(self, active, passive):
        """Rescaled mean jumps ``eps**-alpha (E a, E b)``."""
        ea, eb = self.mean_jumps(active, passive)
        return ea / self.time_scale, eb / self.time_scale

    def admissible(self, state, tol: float = 1e-12) -> bool:
        return True

    def project(self, states):
        return states

    # Mean-field sums.  ``weights`` are the measure of the partner population;
    # ``W[i, j] = w(x_i, x_j)``.  Subclasses override these with closed forms.

    def interaction_field(self, W, weights, states):
        """``F_i = sum_j weights_j K(z_i, z_j)``."""
        states = np.asarray(states, dtype=float)
        cw = W * weights[None, :]
        # z_i passive, z_j active
        _, eb = self.drift_pair(states[None, :, :], states[:, None, :])
        field = np.einsum("ij,ijk->ik", cw, eb)
        if not self.active_passive:
            ea, _ = self.drift_pair(states[:, None, :], states[None, :, :])
            field += np.einsum("ij,ijk->ik", cw, ea)
        return field

    def diffusion_field(self, W, weights, states):
        """``S_i = sum_j weights_j A(z_i, z_j)`` as an ``(N, s, s)`` array."""
        states = np.asarray(states, dtype=float)
        cw = W * weights[None, :]
        _, ebb = self.second_moments(states[None, :, :], states[:, None, :])
        total = np.einsum("ij,ijkl->ikl", cw, ebb)
        if not self.active_passive:
            eaa, _ = self.second_moments(states[:, None, :], states[None, :, :])
            total += np.einsum("ij,ijkl->ikl", cw, eaa)
        return 0.5 * total / self.time_scale


@dataclass
class ParticleEnsemble:
    """``N`` agents with fixed site indices and mutable states."""

    space: PeriodicGrid1D | DiscreteNetwork
    positions: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64).copy()
        self.states = np.array(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        n = len(self.positions)
        if n < 1:
            raise ValueError("ensemble needs at least one agent")
        if self.states.shape[0] != n:
            raise DimensionError("one state per agent required")
        if np.any(self.positions < 0) or np.any(self.positions >= self.space.size):
            raise ValueError("agent position outside the site space")
        self.positions.setflags(write=False)

    @classmethod
    def from_points(cls, space, points, states) -> "ParticleEnsemble":
        if isinstance(space, PeriodicGrid1D):
            idx = space.index_of(np.asarray(points, dtype=float))
        else:
            idx = [space.index_of(p) for p in points]
        return cls(space, idx, states)

    @classmethod
    def on_sites(cls, space, per_site: int, site_states) -> "ParticleEnsemble":
        """``per_site`` agents on every site, each starting from that site's state."""
        site_states = np.asarray(site_states, dtype=float)
        pos = np.repeat(np.arange(space.size), per_site)
        return cls(space, pos, site_states[pos])

    @property
    def N(self) -> int:
        return len(self.positions)

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.space, self.positions, self.states.copy())


def ensemble_observables(ensemble: ParticleEnsemble, binning=None):
    """Spatial marginal ``eta``, per-site mean state and quadratic variation.

    Sites without agents get a NaN mean.  The quadratic variation is
    ``sum_i |v_i - Vbar(x_i)|^2 / N``.
    """
    space = ensemble.space if binning is None else binning
    if space.size != ensemble.space.size:
        raise DimensionError("binning does not match the ensemble's site space")
    pos, v = ensemble.positions, ensemble.states
    if np.any(pos >= space.size):
        raise ValueError("agent outside binning")
    counts = np.bincount(pos, minlength=space.size).astype(float)
    eta = counts / ensemble.N
    sums = np.zeros((space.size, v.shape[1]))
    np.add.at(sums, pos, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        vbar = sums / counts[:, None]
    vbar[counts == 0] = np.nan
    dev = v - vbar[pos]
    qv = float(np.sum(dev * dev) / ensemble.N)
    return eta, vbar, qv


def dp_distance(ensemble: ParticleEnsemble, V, p: float = 2.0) -> float:
    """Distance of the empirical measure to the concentrated profile ``V``.

    ``(sum_i |v_i - V(x_i)|^p / N)^(1/p)`` with the Euclidean state norm.
    """
    if p < 1:
        raise ValueError("order p must be >= 1")
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    target = V[ensemble.positions]
    if not np.all(np.isfinite(target)):
        raise ValueError("V undefined at an occupied site")
    dist = np.linalg.norm(ensemble.states - target, axis=1)
    return float(np.mean(dist ** p) ** (1.0 / p))


def _record(ensemble, store_states):
    eta, vbar, qv = ensemble_observables(ensemble)
    return (ensemble.states.copy() if store_states else None), eta, vbar, qv


def simulate_master(ensemble: ParticleEnsemble, law: InteractionLaw, kernel: Kernel,
                    t_end: float, seed: int, snapshot_times=None,
                    record_events: bool = False, tol: float = 1e-12) -> Trajectory:
    """Gillespie simulation of the pair-interaction jump process.

    Snapshot ``k`` holds the state after all events up to ``snapshot_times[k]``.
    The input ensemble is not modified.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if kernel.space.size != ensemble.space.size:
        raise DimensionError("kernel and ensemble live on different site spaces")
    snaps = sorted(set(float(t) for t in (snapshot_times if snapshot_times is not None
                                          else (0.0, t_end))))
    if snaps[0] < 0 or snaps[-1] > t_end:
        raise ValueError("snapshot times must lie in [0, t_end]")

    rng = make_rng(seed)
    ens = ensemble.copy()
    N = ens.N
    pos = ens.positions
    rates = kernel.matrix[np.ix_(pos, pos)] / N
    np.fill_diagonal(rates, 0.0)
    cdf = np.cumsum(rates.ravel())
    total = float(cdf[-1]) if cdf.size else 0.0
    store = N <= FULL_SNAPSHOT_LIMIT

    out_states, etas, vbars, qvs = [], [], [], []
    ev_t, ev_i, ev_j, ev_a = [], [], [], []
    states = ens.states
    t = 0.0
    snap_iter = iter(snaps)
    next_snap = next(snap_iter, None)
    n_events = 0

    def flush_snapshots(upto):
        nonlocal next_snap
        while next_snap is not None and next_snap < upto:
            s, e, vb, q = _record(ens, store)
            out_states.append(s)
            etas.append(e)
            vbars.append(vb)
            qvs.append(q)
            next_snap = next(snap_iter, None)

    done = total <= 0.0
    # batch size sized to the expected event count, capped for memory
    chunk = int(min(_CHUNK, 1.2 * total * t_end + 64)) if not done else 0
    while not done:
        waits = rng.exponential(1.0 / total, size=chunk)
        picks = np.searchsorted(cdf, rng.random(chunk) * total, side="right")
        np.minimum(picks, cdf.size - 1, out=picks)
        times = t + np.cumsum(waits)
        for k in range(chunk):
            tk = times[k]
            if tk > t_end:
                done = True
                break
            flush_snapshots(tk)
            i, j = divmod(int(picks[k]), N)
            a, b, action = law.sample(states[i], states[j], rng)
            if a is not None:
                states[i] += a
                if not law.admissible(states[i], tol):
                    raise StateViolationError(f"agent {i} left the admissible set at t={tk:.6g}")
            states[j] += b
            if not law.admissible(states[j], tol):
                raise StateViolationError(f"agent {j} left the admissible set at t={tk:.6g}")
            n_events += 1
            if record_events:
                ev_t.append(tk)
                ev_i.append(i)
                ev_j.append(j)
                ev_a.append(action)
        t = times[-1]
    flush_snapshots(np.inf)

    events = None
    if record_events:
        events = {"t": np.array(ev_t), "active": np.array(ev_i, dtype=np.int64),
                  "passive": np.array(ev_j, dtype=np.int64), "action": np.array(ev_a)}
    return Trajectory(
        np.array(snaps),
        np.array(out_states) if store else None,
        positions=np.array(pos),
        observables={"eta": np.array(etas), "mean_state": np.array(vbars),
                     "quadratic_variation": np.array(qvs)},
        events=events,
        seed=seed,
        meta={"n_events": n_events, "total_rate": total, "N": N},
    )
