"""Numerical laboratory for the birth-death chemical diffusion master equation.

Two independent routes compute the projected particle densities: direct
Galerkin integration of the coefficient hierarchy (:mod:`cdme.galerkin`) and
Gaussian expectations of an Ornstein-Uhlenbeck-type PDE (:mod:`cdme.oup`,
:mod:`cdme.reconstruction`). A particle simulator (:mod:`cdme.particles`) and
the well-mixed master equation serve as statistical and analytic references.
"""
from __future__ import annotations

__version__ = "0.1.0"
