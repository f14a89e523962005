"""Social-norm construction on a weighted network.

Each agent keeps rescaled weights ``v`` over ``M`` mental representations and
a rescaled interaction count ``s``.  When an active agent plays the
representation with the highest weight (ties broken uniformly at random),
the passive agent updates

    v' = s/(s+h) v + h/(s+h) e_i,    s' = s + h,    h = 1/J.

Agent states are stored as extended vectors ``(v_1, ..., v_M, s)``.  In the
monokinetic limit (time rescaled by ``h``) every node ``k`` follows

    dV_k/dt = sum_l w_kl rho_l (p(V_l) - V_k) / (s0_k + lambda_k t),
    lambda_k = sum_l w_kl rho_l,

where ``p`` is the tie-averaged argmax distribution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiscreteNetwork, Kernel, check_simplex, project_simplex
from .errors import NumericalError
from .particle import InteractionLaw
from .stepping import Trajectory, integrate

__all__ = [
    "NormState",
    "NormsParams",
    "NormsLaw",
    "argmax_policy",
    "argmax_distribution",
    "norms_collision",
    "norms_law",
    "lambda_rates",
    "solve_norms_monokinetic",
    "two_clique_network",
]

TIE_TOL = 1e-12
DEFAULT_M = 4
DEFAULT_J = 100


def argmax_distribution(v, tol: float = TIE_TOL) -> np.ndarray:
    """Uniform distribution over the maximal entries (along the last axis)."""
    v = np.asarray(v, dtype=float)
    top = v >= v.max(axis=-1, keepdims=True) - tol
    return top / top.sum(axis=-1, keepdims=True)


def argmax_policy(v, rng=None, deterministic: bool = False, tol: float = TIE_TOL) -> int:
    """Index of a largest weight; ties resolved uniformly or by lowest index."""
    v = np.asarray(v, dtype=float)
    ties = np.flatnonzero(v >= v.max() - tol)
    if deterministic or ties.size == 1:
        return int(ties[0])
    if rng is None:
        raise ValueError("random tie-breaking needs a generator")
    return int(ties[rng.integers(ties.size)])


@dataclass(frozen=True)
class NormState:
    v: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.s <= 0:
            raise ValueError("interaction count s must be positive")

    def as_vector(self) -> np.ndarray:
        return np.append(self.v, self.s)

    @classmethod
    def from_vector(cls, z) -> "NormState":
        return cls(np.array(z[:-1]), float(z[-1]))


def norms_collision(state: NormState, i: int, h: float) -> NormState:
    """Passive update after hearing representation ``i``."""
    if not 0 <= i < state.v.size:
        raise IndexError(f"representation index {i} out of range")
    s = state.s
    v = (s / (s + h)) * state.v
    v[i] += h / (s + h)
    return NormState(v, s + h)


@dataclass
class NormsParams:
    network: DiscreteNetwork
    weights: np.ndarray
    M: int = DEFAULT_M
    h: float = 1.0 / DEFAULT_J
    rho: np.ndarray | None = None
    s0: np.ndarray | float = 1.0

    def __post_init__(self):
        n = self.network.size
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (n, n) or np.any(self.weights < 0):
            raise ValueError("weights must be a nonnegative node-by-node matrix")
        if self.h <= 0:
            raise ValueError("h must be positive")
        self.rho = np.ones(n) if self.rho is None else np.asarray(self.rho, dtype=float)
        self.s0 = np.broadcast_to(np.asarray(self.s0, dtype=float), (n,)).copy()
        if np.any(self.s0 <= 0):
            raise ValueError("s0 must be positive")

    @property
    def kernel(self) -> Kernel:
        return Kernel.network(self.network, self.weights)


def lambda_rates(params: NormsParams) -> np.ndarray:
    return params.weights @ params.rho


class NormsLaw(InteractionLaw):
    """Active agent plays its argmax representation; the passive one learns it."""

    active_passive = True
    scale_exponent = 1.0

    def __init__(self, M: int, h: float):
        self.M = M
        self.state_dim = M + 1
        self.h = self.eps = h

    def sample(self, active, passive, rng):
        i = argmax_policy(active[: self.M], rng)
        s = passive[-1]
        c = self.h / (s + self.h)
        b = np.empty_like(passive)
        b[: self.M] = -c * passive[: self.M]
        b[i] += c
        b[-1] = self.h
        return None, b, i

    def _split(self, active, passive):
        p = argmax_distribution(np.asarray(active, dtype=float)[..., : self.M])
        passive = np.asarray(passive, dtype=float)
        return p, passive[..., : self.M], passive[..., -1:]

    def mean_jumps(self, active, passive):
        p, v, s = self._split(active, passive)
        c = self.h / (s + self.h)
        eb = np.concatenate([c * (p - v), np.broadcast_to(self.h, s.shape)], axis=-1)
        return np.zeros_like(eb), eb

    def drift_pair(self, active, passive):
        # h -> 0 limit of the rescaled mean jump
        p, v, s = self._split(active, passive)
        eb = np.concatenate([(p - v) / s, np.ones_like(s)], axis=-1)
        return np.zeros_like(eb), eb

    def second_moments(self, active, passive):
        p, v, s = self._split(active, passive)
        p, v = np.broadcast_arrays(p, v)
        c = (self.h / (s + self.h))[..., None]
        M = self.M
        shape = p.shape[:-1] + (M + 1, M + 1)
        ebb = np.zeros(shape)
        cov = (np.einsum("...i,ij->...ij", p, np.eye(M)) - p[..., :, None] * v[..., None, :]
               - v[..., :, None] * p[..., None, :] + v[..., :, None] * v[..., None, :])
        ebb[..., :M, :M] = c ** 2 * cov
        cross = c[..., 0] * self.h * (p - v)
        ebb[..., :M, M] = cross
        ebb[..., M, :M] = cross
        ebb[..., M, M] = self.h ** 2
        return np.zeros_like(ebb), ebb

    def interaction_field(self, W, weights, states):
        cw = W * weights[None, :]
        lam = cw.sum(axis=1)
        v, s = states[:, : self.M], states[:, self.M]
        dv = (cw @ argmax_distribution(v) - lam[:, None] * v) / s[:, None]
        return np.column_stack([dv, lam])

    def admissible(self, state, tol=1e-12):
        v = state[: self.M]
        return v.min() >= -tol and abs(v.sum() - 1.0) <= tol and state[-1] > 0

    def project(self, states):
        out = np.array(states, dtype=float)
        out[:, : self.M] = project_simplex(out[:, : self.M])
        return out


def norms_law(params: NormsParams) -> NormsLaw:
    return NormsLaw(params.M, params.h)


def solve_norms_monokinetic(params: NormsParams, V0, t_end: float, dt: float,
                            snapshot_times=None) -> Trajectory:
    """RK4 for the time-inhomogeneous node system (no event detection at argmax switches).

    Returned states are the node memories ``V``; the counts
    ``s_k(t) = s0_k + lambda_k t`` are stored in ``observables['s']``.
    """
    V0 = np.asarray(V0, dtype=float)
    if V0.shape != (params.network.size, params.M) or not check_simplex(V0, 1e-9):
        raise ValueError("V0 must hold one simplex vector per node")
    cw = params.weights * params.rho[None, :]
    lam = cw.sum(axis=1)

    def rhs(t, V):
        return (cw @ argmax_distribution(V) - lam[:, None] * V) / (params.s0 + lam * t)[:, None]

    def post(t, V):
        if V.min() < -1e-6 or np.max(np.abs(V.sum(axis=1) - 1.0)) > 1e-6:
            raise NumericalError("norm weights left the simplex", t=t)
        return project_simplex(V)

    times, states = integrate(rhs, V0, t_end, dt, snapshot_times, post_step=post)
    s = params.s0[None, :] + times[:, None] * lam[None, :]
    return Trajectory(times, states, observables={"s": s},
                      meta={"solver": "norms-monokinetic", "dt": dt})


def two_clique_network(size: int = 5, inter: float = 0.01, intra: float = 1.0):
    """Two complete cliques (self-loops included) joined by uniform weak links."""
    n = 2 * size
    w = np.full((n, n), inter)
    w[:size, :size] = intra
    w[size:, size:] = intra
    return DiscreteNetwork.of_size(n), w
