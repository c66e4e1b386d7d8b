"""Numerical laboratory for resonances and one-boson scattering in the
massless spin-boson model on a truncated Fock space."""

__version__ = "0.1.0"
