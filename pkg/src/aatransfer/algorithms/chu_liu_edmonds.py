"""Maximum spanning arborescence decoding (Chu-Liu/Edmonds) with one ROOT dependent."""

from __future__ import annotations

import numpy as np

from ..treebank import DependencyTree
from ._scores import EmptyChartError, allowed_arcs, as_scores, has_spanning_tree, tree_score


def _find_cycle(heads: np.ndarray):
    n = len(heads)
    color = np.zeros(n, dtype=int)
    color[0] = 2
    for start in range(1, n):
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node]
        if color[node] == 1:
            return path[path.index(node):]
        for p in path:
            color[p] = 2
    return None


def _cle(scores: np.ndarray) -> np.ndarray:
    """Unconstrained maximum arborescence rooted at node 0.

    ``scores[h, m]`` with -inf for forbidden arcs; returns ``heads`` with
    ``heads[0] = -1``. Ties go to the lowest head index.
    """
    n = scores.shape[0]
    heads = np.argmax(scores, axis=0)
    heads[0] = -1
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    outside = np.flatnonzero(~in_cycle)
    cyc = np.array(cycle)
    # contracted graph: outside nodes keep their order, cycle node goes last
    c = len(outside)
    sub = np.full((c + 1, c + 1), -np.inf)
    sub[:c, :c] = scores[np.ix_(outside, outside)]

    kept = scores[heads[cyc], cyc]
    entering = scores[np.ix_(outside, cyc)] - kept[None, :]
    enter_at = np.argmax(entering, axis=1)
    sub[:c, c] = entering[np.arange(c), enter_at]

    leaving = scores[np.ix_(cyc, outside)]
    leave_from = np.argmax(leaving, axis=0)
    sub[c, :c] = leaving[leave_from, np.arange(c)]
    sub[c, 0] = -np.inf

    sub_heads = _cle(sub)

    result = heads.copy()
    for idx, node in enumerate(outside[1:], start=1):
        h = sub_heads[idx]
        result[node] = cyc[leave_from[idx]] if h == c else outside[h]
    h = sub_heads[c]
    result[cyc[enter_at[h]]] = outside[h]
    result[0] = -1
    return result


def decode_mst(scores) -> DependencyTree:
    """Highest-scoring single-rooted spanning tree, non-projective.

    The single-root constraint is enforced by re-solving with each ROOT
    dependent fixed whenever the unconstrained optimum has several; among
    equal-scoring choices the lowest dependent index wins.
    """
    s = as_scores(scores)
    allowed = allowed_arcs(s)
    if not has_spanning_tree(allowed):
        raise EmptyChartError(f"no valid tree under the arc mask (t={s.shape[0] - 1})")
    if not np.isfinite(s[:, 1:].max(axis=0)).all():
        raise EmptyChartError("a token has no permitted head")

    heads = _cle(s)
    if np.count_nonzero(heads[1:] == 0) == 1:
        return DependencyTree(tuple(int(h) for h in heads[1:]))

    best = None
    best_score = -np.inf
    for r in np.flatnonzero(allowed[0]):
        if not has_spanning_tree(allowed, root_child=int(r)):
            continue
        forced = s.copy()
        forced[0, :] = -np.inf
        forced[0, r] = s[0, r]
        cand = _cle(forced)[1:]
        score = tree_score(s, cand)
        if score > best_score:
            best, best_score = cand, score
    return DependencyTree(tuple(int(h) for h in best))
