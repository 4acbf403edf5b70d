"""Replacement shortest paths under node failures from one precomputed
evaporated fundamental matrix."""

from .errors import (ChecksumError, GraphFormatError, NumericalGuardError, OracleError,
                     PersistenceError, QueryError, RoundingError, SingularSystemError,
                     TruncatedFileError, VersionError)
from .evaporation import (EdgeProbabilities, EvaporatedChain, alpha_bound, continuum_sweep,
                          policy_alpha_bound,
                          edge_probabilities, error_upper_bound, evaporate, transform_chain)
from .graph import Graph, Policy, TransitionMatrix, diameter_exact, load_graph, read_graph, transition_matrix
from .markov import (FundamentalMatrix, absorption, absorption_from_fundamental,
                     avoidance_fundamental, avoidance_hitting_cost, avoidance_hitting_time,
                     fundamental, hitting_cost, hitting_time, incremental_fundamental)
from .oracle import (Oracle, ReplacementResult, Status, UnsafeAlphaWarning, chain_bound, from_bytes, load,
                     preprocess, query, round_distance, safe_alpha, save, to_bytes, tree_distances)
from .reference import dijkstra_reduced, enumerate_walks, shortest_path_flows

__version__ = "0.1.0"
