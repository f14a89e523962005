"""Kinetic and mean-field models of agents interacting on networks and grids.

Modules
-------
core       site spaces, interaction kernels, simplex utilities
particle   exact stochastic simulation of the N-agent jump process
meanfield  drift/diffusion kernels, characteristics, Fokker-Planck particles
dialect    dialect competition with nonlinear choice probabilities
norms      social-norm construction with argmax play
epidemic   network, reaction-diffusion and local SIR models
cli        ``netkin`` command line entry point
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DiscreteNetwork,
    Kernel,
    PeriodicGrid1D,
    eval_kernel,
    kernel_mass,
    local_limit_coefficient,
    nonlocal_laplacian,
    triangular_kernel,
)
from .errors import (  # noqa: E402
    ConfigError,
    DegenerateStateError,
    DimensionError,
    DomainError,
    NetkinError,
    NumericalError,
    StateViolationError,
    UnsupportedKernelError,
    UnsupportedLawError,
)
from .particle import InteractionLaw, ParticleEnsemble, simulate_master  # noqa: E402
from .stepping import Trajectory  # noqa: E402
