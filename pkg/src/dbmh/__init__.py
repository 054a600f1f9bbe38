"""Numerical laboratory for coupled Dyson Brownian motion at the spectral edge.

Subpackages:
  semicircle      -- semicircle law, Stieltjes transform, quantile tables
  characteristics -- complex characteristic flow of the limiting advection equation
  ensembles       -- generalized Wigner sampling, OU matrix interpolation, eigensolves
  flow            -- the coupled particle integrator with shared Brownian noise
  shortrange      -- banded difference generators and their propagators
  homogenize      -- the homogenized difference predictor and its diagnostics
  edge_stats      -- Monte Carlo statistics at the spectral edge
  experiments     -- reproducible experiment harness (also exposed as the dbmh CLI)
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    characteristics,
    edge_stats,
    ensembles,
    flow,
    homogenize,
    semicircle,
    shortrange,
)
