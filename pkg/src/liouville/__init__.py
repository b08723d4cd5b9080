"""Numerical toolkit for the singular Liouville equation on the unit disk.

Modules
-------
core_params            parameters and closed-form constants
hamiltonian            reduced Hamiltonian, gradients, Hessians, the angular functional E0
critical_solver        Newton and multistart search for critical configurations
hessian_spectral       block-circulant spectrum of the Hessian at the regular polygon
polynomial_identities  complex polynomials and the two structural identities
radial_branches        radial solution branches, shooting, Fourier modes, limit bubbles
pde2d_solver           finite-difference Newton solver and continuation in two dimensions
cli                    command-line front end
"""

__version__ = "0.1.0"

from .exceptions import LiouvilleError
from .core_params import DiskParams

__all__ = ["DiskParams", "LiouvilleError", "__version__"]
