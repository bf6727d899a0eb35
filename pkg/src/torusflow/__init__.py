"""Pseudospectral anisotropic Stokes, Oseen and Navier-Stokes solvers on the flat torus.

Submodules
----------
field          spectral fields, Sobolev norms, transforms
viscosity      viscosity tensors, ellipticity and estimate constants
stokes         mode-wise Stokes solves and their estimates
advection      dealiased convective term and the Oseen operator
oseen          preconditioned Krylov and Picard Oseen solves
navier_stokes  Picard iteration, Galerkin oracle, smallness and decay reports
audit          randomized audits of the inequalities used by the solvers
cli            command-line front end
"""

__version__ = "0.1.0"
