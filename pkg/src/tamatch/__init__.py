"""Learning-augmented online bipartite matching with tested histogram advice."""

from .algorithms import AblationFlags, RunOutcome, TaMParams, greedy, hardness_demo, mimic, ranking, test_and_match
from .core import InvalidInput, TypeHistogram, VertexType, vtype

__all__ = [
    "AblationFlags",
    "InvalidInput",
    "RunOutcome",
    "TaMParams",
    "TypeHistogram",
    "VertexType",
    "greedy",
    "hardness_demo",
    "mimic",
    "ranking",
    "test_and_match",
    "vtype",
]
