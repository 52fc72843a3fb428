"""Distributed optimization from composable LTI blocks.

Algorithms are assembled from an optimization method and consensus
estimators (:mod:`distlab.blocks`), wired in general or factored form
(:mod:`distlab.engine`) and simulated over a Laplacian graph
(:mod:`distlab.graph`) on random least-squares problems
(:mod:`distlab.problem`).
"""

from .blocks import (
    accelerated_estimator,
    general_first_order,
    gradient_method,
    p_estimator,
    pi_estimator,
    series_estimator,
)
from .engine import Factored, General, NetworkEvent, build, run
from .graph import LaplacianGraph, drop_agent, fig2_graph
from .problem import ErrorTrace, QuadraticProblem, sample

__version__ = "0.1.0"
