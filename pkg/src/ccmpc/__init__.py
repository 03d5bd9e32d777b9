"""Chance-constrained finite-horizon control of linear Gaussian systems.

Synthesis of affine disturbance-feedback policies by convex conservative
reformulations of probabilistic constraints, a primal log-barrier solver,
and Monte Carlo validation of the resulting closed loops.
"""

__version__ = "0.1.0"
