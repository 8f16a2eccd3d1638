"""SLE(8) partition functions, uniform spanning tree crossing probabilities
and the numerical checks that tie them together."""

from .coulomb import F_det, F_simplex, Z, crossing_prob, crossing_probs
from .linkpat import LinkPattern, enumerate_patterns, meander_matrix, parse_pattern

__all__ = ["F_det", "F_simplex", "Z", "crossing_prob", "crossing_probs", "LinkPattern",
           "enumerate_patterns", "meander_matrix", "parse_pattern"]
__version__ = "0.1.0"
