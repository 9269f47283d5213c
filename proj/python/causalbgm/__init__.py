"""Bayesian generative modeling for causal effect estimation.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (
    Model,
    __version__,
    dgp_names,
    load,
    quantile,
    recommend_dims,
    simulate,
    train,
)

__all__ = [
    "Model",
    "__version__",
    "dgp_names",
    "load",
    "quantile",
    "recommend_dims",
    "simulate",
    "train",
]
