"""Numerical laboratory for constant-field Landau operators.

Modules
-------
magfield       field matrices, norms, normal form, closed-form spectrum
grid           Gauss-Hermite tensor grids and grid functions
magderiv       magnetic derivatives, Landau operator, Bernstein quantities
eigenbasis     truncated spectral bases, ground state, magnetic translations
thickset       sampling sets and thickness certificates
observability  observability constants, theorem bound, scans
heatcontrol    minimal-norm null control on truncated subspaces
cli            command-line entry point
"""

__version__ = "0.1.0"
