"""Mean-field kernels and the deterministic/SDE solvers built from them.

The drift kernel is ``K(z, y) = w(x, x_y) (E[a | z active, y passive] +
E[b | y active, z passive])`` and the diffusion kernel is half the
corresponding second-moment sum.  Both are divided by the law's time scale
``eps**alpha``, so all solvers here run in rescaled time.

The Vlasov equation is handled through its characteristics: a finite sample
of phase points is transported with positions frozen, each feeling the
average drift of the whole sample.  Monokinetic solutions are the special
case of one sample per site weighted by the spatial marginal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Kernel, eval_kernel
from .errors import DimensionError, NumericalError
from .particle import InteractionLaw, ParticleEnsemble, ensemble_observables, make_rng
from .stepping import Trajectory, integrate, snapshot_steps

__all__ = [
    "DriftKernel",
    "DiffusionKernel",
    "drift_kernel",
    "diffusion_kernel",
    "solve_characteristics",
    "solve_monokinetic",
    "simulate_fokker_planck_particles",
    "first_moment_rhs",
    "observable_series",
]

PSD_TOL = 1e-10


@dataclass(frozen=True)
class DriftKernel:
    kernel: Kernel
    law: InteractionLaw
    rescale: bool = True

    def __call__(self, z, z_other) -> np.ndarray:
        (x, v), (y, u) = z, z_other
        w = eval_kernel(self.kernel, x, y)
        v = np.asarray(v, dtype=float)
        u = np.asarray(u, dtype=float)
        moments = self.law.drift_pair if self.rescale else self.law.mean_jumps
        ea, _ = moments(v, u)
        _, eb = moments(u, v)
        return w * (np.asarray(ea, dtype=float) + np.asarray(eb, dtype=float))

    def field(self, W, weights, states):
        f = self.law.interaction_field(W, weights, states)
        return f if self.rescale else f * self.law.time_scale


@dataclass(frozen=True)
class DiffusionKernel:
    kernel: Kernel
    law: InteractionLaw
    rescale: bool = True

    def __call__(self, z, z_other) -> np.ndarray:
        (x, v), (y, u) = z, z_other
        w = eval_kernel(self.kernel, x, y)
        eaa, _ = self.law.second_moments(np.asarray(v, float), np.asarray(u, float))
        _, ebb = self.law.second_moments(np.asarray(u, float), np.asarray(v, float))
        a = 0.5 * w * (eaa + ebb)
        return a / self.law.time_scale if self.rescale else a

    def field(self, W, weights, states):
        s = self.law.diffusion_field(W, weights, states)
        return s if self.rescale else s * self.law.time_scale


def drift_kernel(kernel: Kernel, law: InteractionLaw, z, z_other, rescale: bool = True):
    """``K(z, z~)`` for phase points ``z = (site, state)``."""
    return DriftKernel(kernel, law, rescale)(z, z_other)


def diffusion_kernel(kernel: Kernel, law: InteractionLaw, z, z_other, rescale: bool = True):
    """``A(z, z~)``, symmetric positive semidefinite."""
    return DiffusionKernel(kernel, law, rescale)(z, z_other)


def observable_series(space, positions, states) -> dict:
    """Per-snapshot ``eta``, per-site means and quadratic variation."""
    etas, means, qvs = [], [], []
    for s in states:
        eta, vbar, qv = ensemble_observables(ParticleEnsemble(space, positions, s))
        etas.append(eta)
        means.append(vbar)
        qvs.append(qv)
    return {"eta": np.array(etas), "mean_state": np.array(means),
            "quadratic_variation": np.array(qvs)}


def _pair_matrix(ensemble: ParticleEnsemble, kernel: Kernel):
    if kernel.space.size != ensemble.space.size:
        raise DimensionError("kernel and ensemble live on different site spaces")
    pos = ensemble.positions
    return kernel.matrix[np.ix_(pos, pos)]


def _default_weights(n, weights):
    if weights is None:
        return np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise DimensionError("one weight per sample required")
    return weights


def solve_characteristics(samples: ParticleEnsemble, drift: DriftKernel, t_end: float,
                          dt: float, snapshot_times=None, weights=None,
                          method: str = "rk4") -> Trajectory:
    """Transport sample states along ``dV_i/dt = sum_j c_j K(z_i, z_j)``.

    ``c_j = 1/N`` unless ``weights`` are given.
    """
    W = _pair_matrix(samples, drift.kernel)
    c = _default_weights(samples.N, weights)
    times, states = integrate(lambda t, v: drift.field(W, c, v), samples.states,
                              t_end, dt, snapshot_times, method=method)
    return Trajectory(times, states, positions=np.array(samples.positions),
                      observables=observable_series(samples.space, samples.positions, states),
                      meta={"solver": "characteristics", "dt": dt})


def solve_monokinetic(eta, V0, drift: DriftKernel, t_end: float, dt: float,
                      snapshot_times=None, method: str = "rk4") -> Trajectory:
    """``dV(x)/dt = sum_y eta(y) K(x, V(x), y, V(y))`` on the kernel's sites.

    ``eta`` is the (stationary) spatial measure as a per-site weight array.
    """
    W = drift.kernel.matrix
    n = W.shape[0]
    eta = np.asarray(eta, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    if eta.shape != (n,) or V0.shape[0] != n:
        raise DimensionError("eta and V0 must have one entry per site")
    if np.any(eta < 0):
        raise ValueError("eta must be nonnegative")
    times, states = integrate(lambda t, v: drift.field(W, eta, v), V0, t_end, dt,
                              snapshot_times, method=method)
    return Trajectory(times, states, meta={"solver": "monokinetic", "dt": dt})


def _psd_sqrt(S, tol=PSD_TOL):
    vals, vecs = np.linalg.eigh(0.5 * (S + np.swapaxes(S, -1, -2)))
    scale = np.maximum(1.0, np.abs(vals).max(axis=-1, keepdims=True))
    if np.any(vals < -tol * scale):
        raise NumericalError(f"diffusion matrix not PSD (min eigenvalue {vals.min():.3g})")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return np.einsum("...ik,...k,...jk->...ij", vecs, root, vecs)


def simulate_fokker_planck_particles(samples: ParticleEnsemble, drift: DriftKernel,
                                     diffusion: DiffusionKernel, t_end: float, dt: float,
                                     seed: int, snapshot_times=None,
                                     weights=None) -> Trajectory:
    """Euler-Maruyama for ``dV_i = F_i dt + sqrt(2) S_i^(1/2) dW_i``.

    ``F_i`` and ``S_i`` are the ``c``-weighted sums of drift and diffusion
    kernels over all samples.  States are passed through the law's projection
    after each step.
    """
    W = _pair_matrix(samples, drift.kernel)
    Wd = W if diffusion.kernel is drift.kernel else _pair_matrix(samples, diffusion.kernel)
    c = _default_weights(samples.N, weights)
    law = drift.law
    rng = make_rng(seed)
    n_steps, wanted = snapshot_steps(t_end, dt, snapshot_times)
    v = samples.states.copy()
    times, states = [], []
    if 0 in wanted:
        times.append(wanted[0])
        states.append(v.copy())
    sq = np.sqrt(2.0 * dt)
    for k in range(1, n_steps + 1):
        f = drift.field(W, c, v)
        root = _psd_sqrt(diffusion.field(Wd, c, v))
        noise = rng.standard_normal(v.shape)
        v = v + dt * f + sq * np.einsum("nij,nj->ni", root, noise)
        if not np.all(np.isfinite(v)):
            raise NumericalError("non-finite state", t=k * dt)
        v = law.project(v)
        if k in wanted:
            times.append(wanted[k])
            states.append(v.copy())
    states = np.array(states)
    return Trajectory(np.array(times), states, positions=np.array(samples.positions),
                      observables=observable_series(samples.space, samples.positions, states),
                      seed=seed, meta={"solver": "fokker-planck", "dt": dt})


def first_moment_rhs(samples: ParticleEnsemble, kernel: Kernel, law: InteractionLaw,
                     include_self: bool = True) -> np.ndarray:
    """Empirical ``(1/N^2) sum_{i,j} W(z_i, z_j)`` in unscaled time.

    ``include_self=False`` drops the diagonal, giving the exact drift of the
    mean state of the N-agent process for symmetric kernels.
    """
    W = _pair_matrix(samples, kernel).copy()
    if not include_self:
        np.fill_diagonal(W, 0.0)
    c = np.full(samples.N, 1.0 / samples.N)
    f = law.interaction_field(W, c, samples.states) * law.time_scale
    return f.mean(axis=0)
