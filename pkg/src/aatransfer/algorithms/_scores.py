"""Arc score matrices and helpers shared by the inference routines.

An arc score matrix for a sentence of ``t`` tokens is a float array of shape
``(t + 1, t + 1)``; entry ``[h, m]`` scores the arc from head ``h`` (0 is ROOT)
to dependent ``m``. Column 0 and the diagonal are always MASKED.
"""

from __future__ import annotations

from collections import deque
from typing import Optional, Sequence

import numpy as np

MASKED = -np.inf


class EmptyChartError(ValueError):
    """No single-rooted spanning tree survives the arc mask."""


class NumericalError(ArithmeticError):
    """A partition function came out non-finite."""


def as_scores(scores) -> np.ndarray:
    """Validate and normalise an arc score matrix (returns a float64 copy)."""
    s = np.array(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 2:
        raise ValueError(f"arc scores must be (t+1, t+1) with t >= 1, got {s.shape}")
    if np.isnan(s).any() or np.isposinf(s).any():
        raise ValueError("arc scores must be finite or MASKED")
    s[:, 0] = MASKED
    np.fill_diagonal(s, MASKED)
    return s


def new_scores(t: int, fill: float = 0.0) -> np.ndarray:
    """A ``(t+1, t+1)`` score matrix with every permissible arc set to ``fill``."""
    return as_scores(np.full((t + 1, t + 1), fill))


def allowed_arcs(scores: np.ndarray) -> np.ndarray:
    return np.isfinite(scores)


def tree_score(scores: np.ndarray, heads: Sequence[int]) -> float:
    """Sum of arc scores of a tree; ``heads[m-1]`` is the head of ``m``."""
    total = 0.0
    for m, h in enumerate(heads, start=1):
        total += scores[h, m]
    return float(total)


def has_spanning_tree(allowed: np.ndarray, root_child: Optional[int] = None) -> bool:
    """Whether a single-rooted spanning tree exists using only allowed arcs.

    With ``root_child`` the ROOT arc is fixed to that dependent.
    """
    allowed = np.asarray(allowed, dtype=bool)
    t = allowed.shape[0] - 1
    words = allowed[1:, 1:].copy()
    np.fill_diagonal(words, False)
    candidates = [root_child] if root_child is not None else range(1, t + 1)
    for r in candidates:
        if not allowed[0, r]:
            continue
        seen = np.zeros(t + 1, dtype=bool)
        seen[r] = True
        queue = deque([r])
        while queue:
            h = queue.popleft()
            for m in np.flatnonzero(words[h - 1]) + 1:
                if not seen[m]:
                    seen[m] = True
                    queue.append(m)
        if seen[1:].all():
            return True
    return False


def require_tree(scores: np.ndarray) -> None:
    if not has_spanning_tree(allowed_arcs(scores)):
        t = scores.shape[0] - 1
        raise EmptyChartError(f"no valid tree under the arc mask (t={t})")


def logsumexp(x: np.ndarray) -> float:
    m = np.max(x) if x.size else -np.inf
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(x - m))))
