"""Exhaustive enumeration of small dependency trees, for use as a test oracle."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..treebank import DependencyTree, is_projective

MAX_ENUMERATION_LENGTH = 8


def enumerate_trees(
    t: int,
    projective_only: bool = False,
    mask: Optional[np.ndarray] = None,
) -> list[DependencyTree]:
    """All single-rooted trees over ``t`` tokens, each exactly once.

    ``mask`` is a boolean ``(t+1, t+1)`` array of permitted ``[head, dep]``
    arcs. Trees come out in lexicographic order of their head sequences.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    if t > MAX_ENUMERATION_LENGTH:
        raise ValueError(f"refusing to enumerate trees for t={t} > {MAX_ENUMERATION_LENGTH}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (t + 1, t + 1):
            raise ValueError(f"mask shape {mask.shape} does not match t={t}")

    heads = [0] * (t + 1)
    out: list[DependencyTree] = []

    def closes_no_cycle(m: int) -> bool:
        # follow already-assigned heads (tokens < m) upward from m
        node = heads[m]
        while 0 < node < m:
            node = heads[node]
        return node != m

    def assign(m: int, n_roots: int):
        if m > t:
            if n_roots != 1:
                return
            seq = tuple(heads[1:])
            if _acyclic(seq) and (not projective_only or is_projective(seq)):
                out.append(DependencyTree(seq))
            return
        for h in range(t + 1):
            if h == m or (mask is not None and not mask[h, m]):
                continue
            if h == 0 and n_roots == 1:
                continue
            heads[m] = h
            if h != 0 and not closes_no_cycle(m):
                continue
            assign(m + 1, n_roots + (h == 0))
        heads[m] = 0

    assign(1, 0)
    return out


def _acyclic(heads: tuple[int, ...]) -> bool:
    t = len(heads)
    for start in range(1, t + 1):
        node = start
        for _ in range(t + 1):
            node = heads[node - 1]
            if node == 0:
                break
        else:
            return False
    return True
