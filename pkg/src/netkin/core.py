"""Site spaces, interaction kernels and the nonlocal operators built on them.

Two kinds of structural domain are supported: the periodic unit interval
discretised by ``n`` equispaced nodes, and a finite weighted network.  All
nonlocal integrals are evaluated with the same rule, ``sum_j w(x_i, x_j) q_j
phi_j``, where the quadrature weights ``q`` are the grid spacing on the grid
and one on a network.  Fields are plain numpy arrays whose leading axis runs
over sites.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateStateError,
    DimensionError,
    DomainError,
    UnsupportedKernelError,
)

__all__ = [
    "PeriodicGrid1D",
    "DiscreteNetwork",
    "Kernel",
    "periodic_distance",
    "triangular_kernel",
    "eval_kernel",
    "kernel_mass",
    "nonlocal_laplacian",
    "grid_laplacian",
    "local_limit_coefficient",
    "project_simplex",
    "check_simplex",
]

SIMPLEX_TOL = 1e-12


def periodic_distance(x, y):
    """Distance on the unit circle ``[0, 1)``."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class PeriodicGrid1D:
    """``n`` equispaced nodes ``x_k = k h`` on the periodic unit interval."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid needs a positive integer number of cells, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @property
    def quadrature_weights(self) -> np.ndarray:
        return np.full(self.n, self.h)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x) & (x >= 0.0) & (x < 1.0)))

    def index_of(self, x) -> np.ndarray:
        """Index of the node nearest to ``x`` (periodically)."""
        if not self.contains(x):
            raise DomainError(f"point(s) outside [0, 1): {x}")
        return np.rint(np.asarray(x, dtype=float) * self.n).astype(int) % self.n

    def distance_matrix(self) -> np.ndarray:
        p = self.points
        return periodic_distance(p[:, None], p[None, :])


@dataclass(frozen=True)
class DiscreteNetwork:
    """Finite set of nodes identified by hashable labels."""

    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("network node identifiers must be unique")
        if not self.nodes:
            raise ValueError("network needs at least one node")

    @classmethod
    def of_size(cls, m: int) -> "DiscreteNetwork":
        return cls(tuple(range(m)))

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def quadrature_weights(self) -> np.ndarray:
        return np.ones(self.size)

    def index_of(self, node: Hashable) -> int:
        try:
            return self.nodes.index(node)
        except ValueError:
            raise DomainError(f"unknown network node {node!r}") from None


SiteSpace = PeriodicGrid1D | DiscreteNetwork


@dataclass(frozen=True, eq=False)
class Kernel:
    """Nonnegative interaction rate ``w(x, y)`` on a site space.

    On a grid the kernel is a function of the periodic distance; ``matrix``
    holds its values between all pairs of nodes.  Convolutional kernels have
    the form ``w(x, y) = profile(d(x, y) / scale) / scale`` with an even
    profile supported in ``[-support, support]``.
    """

    space: SiteSpace
    matrix: np.ndarray
    symmetric: bool = True
    distance_fn: Callable | None = field(default=None, repr=False)
    profile: Callable | None = field(default=None, repr=False)
    scale: float | None = None
    support: float = 1.0

    def __post_init__(self):
        w = np.array(self.matrix, dtype=float)
        n = self.space.size
        if w.shape != (n, n):
            raise DimensionError(f"kernel matrix has shape {w.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("kernel values must be finite and nonnegative")
        if self.symmetric and not np.allclose(w, w.T, rtol=0.0, atol=1e-12):
            raise ValueError("kernel flagged symmetric but matrix is not")
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)

    @property
    def convolutional(self) -> bool:
        return self.profile is not None

    @classmethod
    def from_distance(cls, space: PeriodicGrid1D, fn: Callable) -> "Kernel":
        """Kernel ``w(x, y) = fn(d(x, y))`` with periodic distance ``d``."""
        return cls(space, fn(space.distance_matrix()), symmetric=True, distance_fn=fn)

    @classmethod
    def convolution(cls, space: PeriodicGrid1D, profile: Callable, scale: float,
                    support: float = 1.0) -> "Kernel":
        if scale <= 0:
            raise ValueError("kernel scale must be positive")

        def fn(d):
            return profile(np.asarray(d) / scale) / scale

        return cls(space, fn(space.distance_matrix()), symmetric=True, distance_fn=fn,
                   profile=profile, scale=float(scale), support=support)

    @classmethod
    def constant(cls, space: SiteSpace, value: float = 1.0) -> "Kernel":
        n = space.size
        fn = None
        if isinstance(space, PeriodicGrid1D):
            def fn(d):
                return np.full(np.shape(d), float(value))
        return cls(space, np.full((n, n), float(value)), symmetric=True, distance_fn=fn)

    @classmethod
    def network(cls, network: DiscreteNetwork, weights) -> "Kernel":
        w = np.asarray(weights, dtype=float)
        sym = w.shape == (network.size, network.size) and np.allclose(w, w.T, atol=1e-12)
        return cls(network, w, symmetric=bool(sym))

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)


def triangular_kernel(space: PeriodicGrid1D, x0: float, alpha: float) -> Kernel:
    """``w(x, y) = alpha (x0 - d(x, y))_+`` written as a convolution of width ``x0``."""
    amp = alpha * x0 ** 2

    def profile(s):
        return amp * np.clip(1.0 - np.abs(s), 0.0, None)

    return Kernel.convolution(space, profile, x0)


def eval_kernel(kernel: Kernel, x, y) -> float:
    """Evaluate ``w(x, y)``.

    Grid kernels accept any point of ``[0, 1)``; network kernels take node
    identifiers.
    """
    space = kernel.space
    if isinstance(space, PeriodicGrid1D):
        if not (space.contains(x) and space.contains(y)):
            raise DomainError(f"sites ({x}, {y}) outside [0, 1)")
        if kernel.distance_fn is None:
            return float(kernel.matrix[space.index_of(x), space.index_of(y)])
        return float(kernel.distance_fn(periodic_distance(x, y)))
    return float(kernel.matrix[space.index_of(x), space.index_of(y)])


def _check_field(kernel: Kernel, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0 or phi.shape[0] != kernel.space.size:
        raise DimensionError(
            f"field with leading dimension {phi.shape[:1]} does not match "
            f"{kernel.space.size} sites")
    return phi


def _weighted_apply(kernel: Kernel, phi: np.ndarray) -> np.ndarray:
    q = kernel.space.quadrature_weights
    qphi = phi * q.reshape((-1,) + (1,) * (phi.ndim - 1))
    return kernel.matrix @ qphi


def kernel_mass(kernel: Kernel, density=None) -> np.ndarray:
    """``kappa(x) = int w(x, y) rho(y) dy``; with ``density=None`` this is ``alpha(x)``."""
    if density is None:
        density = np.ones(kernel.space.size)
    density = _check_field(kernel, density)
    if np.any(density < 0):
        raise ValueError("density must be nonnegative")
    return _weighted_apply(kernel, density)


def nonlocal_laplacian(kernel: Kernel, phi) -> np.ndarray:
    """``(Delta_w phi)(x) = int w(x, y) (phi(y) - phi(x)) dy``.

    ``phi`` may carry trailing component axes.
    """
    phi = _check_field(kernel, phi)
    mass = kernel_mass(kernel)
    return _weighted_apply(kernel, phi) - mass.reshape((-1,) + (1,) * (phi.ndim - 1)) * phi


def grid_laplacian(phi, space: PeriodicGrid1D) -> np.ndarray:
    """Three-point periodic second difference along the leading axis."""
    phi = np.asarray(phi, dtype=float)
    return (np.roll(phi, -1, axis=0) - 2.0 * phi + np.roll(phi, 1, axis=0)) / space.h ** 2


def local_limit_coefficient(kernel: Kernel) -> tuple[float, float]:
    """Second moment ``C`` of the kernel profile and ``sigma = sqrt(C) * scale``."""
    if not kernel.convolutional:
        raise UnsupportedKernelError("local limit needs a convolutional kernel")
    a = kernel.support
    c, _ = integrate.quad(lambda s: s * s * float(kernel.profile(s)), -a, a,
                          points=[0.0], limit=200, epsabs=1e-13, epsrel=1e-12)
    return c, float(np.sqrt(c) * kernel.scale)


def project_simplex(v, axis: int = -1) -> np.ndarray:
    """Clamp negative entries to zero and renormalise to unit sum.

    Meant for repairing rounding drift, not as a Euclidean projection.
    Vectors already on the simplex up to a few ulps are returned unchanged,
    which makes the map exactly idempotent.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DegenerateStateError("non-finite state vector")
    v = np.clip(v, 0.0, None)
    total = v.sum(axis=axis, keepdims=True)
    if np.any(total <= 0.0):
        raise DegenerateStateError("state vector has no positive mass")
    slack = 4 * np.finfo(float).eps * v.shape[axis]
    return np.where(np.abs(total - 1.0) <= slack, v, v / total)


def check_simplex(v, tol: float = SIMPLEX_TOL, axis: int = -1) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(v >= -tol) and np.all(np.abs(v.sum(axis=axis) - 1.0) <= tol))
