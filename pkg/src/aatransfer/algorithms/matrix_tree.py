"""Non-projective partition function and arc marginals via the Matrix-Tree Theorem.

Uses the root-constrained Laplacian (Koo et al., 2007): the first row of the
word-to-word Laplacian is replaced by the ROOT arc weights, so the determinant
sums over trees with exactly one ROOT dependent.
"""

from __future__ import annotations

import numpy as np

from ._scores import NumericalError, as_scores, require_tree


def _laplacian(scores: np.ndarray):
    cols = scores[:, 1:]
    # per-column shift keeps exp() in range; masked entries become exactly 0
    shift = cols.max(axis=0)
    weights = np.exp(cols - shift)
    root = weights[0]
    words = weights[1:]
    np.fill_diagonal(words, 0.0)
    lap = -words
    lap[np.diag_indices_from(lap)] = words.sum(axis=0)
    lap[0, :] = root
    return lap, words, root, shift


def _log_partition(scores: np.ndarray):
    lap, words, root, shift = _laplacian(scores)
    sign, logdet = np.linalg.slogdet(lap)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalError(
            f"root-constrained Laplacian determinant not positive (t={scores.shape[0] - 1})"
        )
    return logdet + shift.sum(), lap, words, root


def log_partition_nonprojective(scores) -> float:
    """log Z over all single-rooted spanning trees permitted by the mask."""
    s = as_scores(scores)
    require_tree(s)
    return float(_log_partition(s)[0])


def arc_marginals_nonprojective(scores) -> np.ndarray:
    """Arc marginals over single-rooted spanning trees, shaped like ``scores``."""
    return log_partition_and_marginals_nonprojective(scores)[1]


def log_partition_and_marginals_nonprojective(scores) -> tuple[float, np.ndarray]:
    s = as_scores(scores)
    require_tree(s)
    log_z, lap, words, root = _log_partition(s)
    inv = np.linalg.inv(lap)
    t = lap.shape[0]
    # d log det / d lap[i, j] = inv[j, i]; row 0 of lap holds the ROOT weights
    not_first = np.ones(t)
    not_first[0] = 0.0
    word_marg = words * (
        (np.diag(inv) * not_first)[None, :] - inv.T * not_first[:, None]
    )
    marg = np.zeros_like(s)
    marg[1:, 1:] = word_marg
    marg[0, 1:] = root * inv[:, 0]
    if not np.isfinite(marg).all():
        raise NumericalError(f"non-finite arc marginals (t={t})")
    return float(log_z), marg
