"""Exact tools for two-spin systems on bounded-degree bipartite multigraphs.

Submodules: ``model`` (parameters, graphs, weighted networks), ``engine``
(exact partition sums and decompositions), ``phasediagram`` (tree recursion
and thresholds), ``moments`` (first/second moment exponents), ``gadgets``
(symmetry breakers, sampled phase gadgets, balancing), ``reductions``
(instance constructions with exact certificates), and ``cli``.
"""

from .engine import (
    LogValue,
    PhaseDecomposition,
    PhaseLayout,
    count_independent_sets,
    eliminate_pendants,
    flip_transform_check,
    kernel_backend,
    marginal,
    partition_function,
    phase_decomposition,
    relative_difference,
)
from .model import (
    BipartiteMultigraph,
    SpinParams,
    WeightedNetwork,
    build_graph,
    graph_from_json_dict,
    to_weighted_network,
)
from .phasediagram import (
    PhasePoint,
    Regime,
    classify_uniqueness,
    extremal_marginals,
    hardcore_lambda_c,
    lambda_interval,
    tree_map,
)

__version__ = "0.1.0"

__all__ = [
    "BipartiteMultigraph",
    "LogValue",
    "PhaseDecomposition",
    "PhaseLayout",
    "PhasePoint",
    "Regime",
    "SpinParams",
    "WeightedNetwork",
    "build_graph",
    "classify_uniqueness",
    "count_independent_sets",
    "eliminate_pendants",
    "extremal_marginals",
    "flip_transform_check",
    "graph_from_json_dict",
    "hardcore_lambda_c",
    "kernel_backend",
    "lambda_interval",
    "marginal",
    "partition_function",
    "phase_decomposition",
    "relative_difference",
    "to_weighted_network",
    "tree_map",
    "__version__",
]
