"""Spectral solver for stratified steady periodic capillary-gravity water
waves in the conformal strip: dispersion analysis, branch continuation,
formal-stability tracking and flow-field reconstruction."""

__version__ = "0.1.0"
