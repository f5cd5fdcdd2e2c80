"""Numerical laboratory for radiative decay of bound states in a nonlinear Klein-Gordon equation.

Modules
-------
grid_spectral      grid, potentials, eigendecomposition and functional calculus of B
resonance          resonance hypotheses and multi-index catalogues
hamiltonian_jets   formal Hamiltonians, Poisson brackets, Taylor jet of the nonlinearity
normalform         homological equation and Birkhoff normalisation
scattering_fgr     limiting absorption, distorted waves, FGR matrices
dynamics           PDE and reduced-model integrators with diagnostics
cli                command-line front end (config, cache, report)
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DegenerateNonlinearity, DomainError, HypothesisViolation,  # noqa: F401
                     InstabilityError, LabError, PreconditionError, ResolutionError)
