"""Exact inference over single-rooted dependency trees."""

from ._scores import (
    MASKED,
    EmptyChartError,
    NumericalError,
    allowed_arcs,
    as_scores,
    has_spanning_tree,
    new_scores,
    tree_score,
)
from .chu_liu_edmonds import decode_mst
from .eisner import (
    arc_marginals_projective,
    decode_projective,
    log_partition_and_marginals_projective,
    log_partition_projective,
)
from .enumerate import MAX_ENUMERATION_LENGTH, enumerate_trees
from .matrix_tree import (
    arc_marginals_nonprojective,
    log_partition_and_marginals_nonprojective,
    log_partition_nonprojective,
)


def log_partition(scores, projective: bool = False) -> float:
    if projective:
        return log_partition_projective(scores)
    return log_partition_nonprojective(scores)


def log_partition_and_marginals(scores, projective: bool = False):
    if projective:
        return log_partition_and_marginals_projective(scores)
    return log_partition_and_marginals_nonprojective(scores)


def arc_marginals(scores, projective: bool = False):
    return log_partition_and_marginals(scores, projective)[1]


def decode(scores, projective: bool = False):
    return decode_projective(scores) if projective else decode_mst(scores)


__all__ = [
    "MASKED",
    "MAX_ENUMERATION_LENGTH",
    "EmptyChartError",
    "NumericalError",
    "allowed_arcs",
    "arc_marginals",
    "arc_marginals_nonprojective",
    "arc_marginals_projective",
    "as_scores",
    "decode",
    "decode_mst",
    "decode_projective",
    "enumerate_trees",
    "has_spanning_tree",
    "log_partition",
    "log_partition_and_marginals",
    "log_partition_and_marginals_nonprojective",
    "log_partition_and_marginals_projective",
    "log_partition_nonprojective",
    "log_partition_projective",
    "new_scores",
    "tree_score",
]
