"""Adiabatic perturbations of periodic Schrodinger operators: Hill band structure,
complex momentum, action integrals, monodromy matrices, cocycles and spectral
localization."""

__version__ = "0.1.0"
