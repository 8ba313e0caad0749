"""Numerical laboratory for the linear and nonlinear third-order acoustic
equation with exponential memory: per-mode exact solutions, decay rates,
energy identities, the vanishing-diffusivity limit and a pseudospectral
nonlinear solver."""

__version__ = "0.1.0"
