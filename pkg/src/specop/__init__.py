"""specop: a gated spectral neural operator with a spline-network global
token, synthetic PDE data generators, a small training/eval harness, and
numeric verification of the model's Lipschitz and quadrature guarantees.
"""

__version__ = "0.1.0"
