"""Projective inference over Eisner charts: inside-outside and Viterbi decoding.

Charts span word positions 1..t only; the single ROOT arc is added on top,
which restricts the sums and the argmax to single-rooted trees.

Chart items, for ``i < j``:

* ``cr[i, j]`` complete span headed by ``i`` reaching right to ``j``
* ``cl[i, j]`` complete span headed by ``j`` reaching left to ``i``
* ``ir[i, j]`` incomplete span for arc ``i -> j``
* ``il[i, j]`` incomplete span for arc ``j -> i``
"""

from __future__ import annotations

import numpy as np

from ..treebank import DependencyTree
from ._scores import EmptyChartError, as_scores

NEG = -np.inf


def _lse(x: np.ndarray) -> float:
    m = x.max()
    if m == NEG:
        return NEG
    return float(m + np.log(np.exp(x - m).sum()))


def _inside(s: np.ndarray):
    t = s.shape[0] - 1
    n = t + 2
    cr = np.full((n, n), NEG)
    cl = np.full((n, n), NEG)
    ir = np.full((n, n), NEG)
    il = np.full((n, n), NEG)
    split = np.full((n, n), NEG)
    for i in range(1, t + 1):
        cr[i, i] = cl[i, i] = 0.0
    for width in range(1, t):
        for i in range(1, t - width + 1):
            j = i + width
            inner = _lse(cr[i, i:j] + cl[i + 1:j + 1, j])
            split[i, j] = inner
            ir[i, j] = s[i, j] + inner
            il[i, j] = s[j, i] + inner
            cr[i, j] = _lse(ir[i, i + 1:j + 1] + cr[i + 1:j + 1, j])
            cl[i, j] = _lse(cl[i, i:j] + il[i:j, j])
    roots = np.array([s[0, m] + cl[1, m] + cr[m, t] for m in range(1, t + 1)])
    return cr, cl, ir, il, split, roots


def _spread(value: float, grad: float, terms: np.ndarray) -> np.ndarray:
    # share of an adjoint flowing to each summand of a log-sum-exp item
    if grad == 0.0 or value == NEG:
        return np.zeros_like(terms)
    return grad * np.exp(terms - value)


def log_partition_and_marginals_projective(scores) -> tuple[float, np.ndarray]:
    s = as_scores(scores)
    t = s.shape[0] - 1
    cr, cl, ir, il, split, roots = _inside(s)
    log_z = _lse(roots)
    if log_z == NEG:
        raise EmptyChartError(f"no projective tree under the arc mask (t={t})")

    n = t + 2
    gcr = np.zeros((n, n))
    gcl = np.zeros((n, n))
    gir = np.zeros((n, n))
    gil = np.zeros((n, n))
    marg = np.zeros_like(s)
    root_share = np.exp(roots - log_z)
    for m in range(1, t + 1):
        marg[0, m] = root_share[m - 1]
        gcl[1, m] += root_share[m - 1]
        gcr[m, t] += root_share[m - 1]

    for width in range(t - 1, 0, -1):
        for i in range(1, t - width + 1):
            j = i + width
            # complete items depend on incomplete items of the same span
            p = _spread(cr[i, j], gcr[i, j], ir[i, i + 1:j + 1] + cr[i + 1:j + 1, j])
            gir[i, i + 1:j + 1] += p
            gcr[i + 1:j + 1, j] += p
            p = _spread(cl[i, j], gcl[i, j], cl[i, i:j] + il[i:j, j])
            gcl[i, i:j] += p
            gil[i:j, j] += p
            marg[i, j] = gir[i, j]
            marg[j, i] = gil[i, j]
            p = _spread(split[i, j], gir[i, j] + gil[i, j], cr[i, i:j] + cl[i + 1:j + 1, j])
            gcr[i, i:j] += p
            gcl[i + 1:j + 1, j] += p
    return log_z, marg


def log_partition_projective(scores) -> float:
    """log Z over single-rooted projective trees permitted by the mask."""
    s = as_scores(scores)
    t = s.shape[0] - 1
    log_z = _lse(_inside(s)[-1])
    if log_z == NEG:
        raise EmptyChartError(f"no projective tree under the arc mask (t={t})")
    return log_z


def arc_marginals_projective(scores) -> np.ndarray:
    return log_partition_and_marginals_projective(scores)[1]


def decode_projective(scores) -> DependencyTree:
    """Highest-scoring single-rooted projective tree (Eisner's algorithm).

    Ties go to the first maximum, i.e. the lowest split point and, for the
    ROOT arc, the lowest dependent index.
    """
    s = as_scores(scores)
    t = s.shape[0] - 1
    n = t + 2
    cr = np.full((n, n), NEG)
    cl = np.full((n, n), NEG)
    ir = np.full((n, n), NEG)
    il = np.full((n, n), NEG)
    b_inner = np.zeros((n, n), dtype=int)
    b_cr = np.zeros((n, n), dtype=int)
    b_cl = np.zeros((n, n), dtype=int)
    for i in range(1, t + 1):
        cr[i, i] = cl[i, i] = 0.0
    for width in range(1, t):
        for i in range(1, t - width + 1):
            j = i + width
            inner = cr[i, i:j] + cl[i + 1:j + 1, j]
            k = int(np.argmax(inner))
            b_inner[i, j] = i + k
            ir[i, j] = s[i, j] + inner[k]
            il[i, j] = s[j, i] + inner[k]
            right = ir[i, i + 1:j + 1] + cr[i + 1:j + 1, j]
            k = int(np.argmax(right))
            b_cr[i, j] = i + 1 + k
            cr[i, j] = right[k]
            left = cl[i, i:j] + il[i:j, j]
            k = int(np.argmax(left))
            b_cl[i, j] = i + k
            cl[i, j] = left[k]
    roots = np.array([s[0, m] + cl[1, m] + cr[m, t] for m in range(1, t + 1)])
    best = int(np.argmax(roots))
    if roots[best] == NEG:
        raise EmptyChartError(f"no projective tree under the arc mask (t={t})")

    heads = [0] * (t + 1)
    root = best + 1
    heads[root] = 0
    stack = [("cl", 1, root), ("cr", root, t)]
    while stack:
        kind, i, j = stack.pop()
        if i == j:
            continue
        if kind == "cr":
            k = b_cr[i, j]
            stack += [("ir", i, k), ("cr", k, j)]
        elif kind == "cl":
            k = b_cl[i, j]
            stack += [("cl", i, k), ("il", k, j)]
        else:
            if kind == "ir":
                heads[j] = i
            else:
                heads[i] = j
            k = b_inner[i, j]
            stack += [("cr", i, k), ("cl", k + 1, j)]
    return DependencyTree(tuple(heads[1:]))
