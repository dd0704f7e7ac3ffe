"""Static figures from stripwave output files.

This package reads the serialized branch, field, stagnation and
critical-layer formats only; it never calls the solver.
"""

__version__ = "0.1.0"
