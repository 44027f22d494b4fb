"""driftlab: numerics for Brownian motion with deterministic drift.

Samplers, Green/Martin kernels, discrete capacities, hitting-probability
Monte Carlo, double-point experiments, and box-counting dimension
estimators, bound together by a reproducible experiment runner (CLI:
``driftlab``).
"""

__version__ = "0.1.0"

from .randpath import PathSample, RngStream, TimeGrid, brownian_sample, fbm_sample, refine_bridge

__all__ = [
    "TimeGrid",
    "PathSample",
    "RngStream",
    "brownian_sample",
    "refine_bridge",
    "fbm_sample",
    "__version__",
]
