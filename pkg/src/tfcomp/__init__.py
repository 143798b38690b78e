"""Numerical time-frequency analysis of composition operators.

Subadditive weights and their Young conjugates, closed-form and sampled
signals, short-time Fourier transforms, weighted modulation norms, symbols
of composition operators and their decay diagnostics, ultradifferential
operators, and Kohn-Nirenberg quantisation.
"""
from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
