import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aatransfer.algorithms import arc_marginals, decode, log_partition, tree_score
from aatransfer.ambiguity import (
    DEFAULT_SIGMA,
    AmbiguityConfig,
    AmbiguousArcSet,
    ArcSetError,
    build_arc_set,
    constrain_scores,
    read_arc_sets,
    top_mass_heads,
    union_arc_sets,
    write_arc_sets,
)
from aatransfer.treebank import DependencyTree
from oracle import brute_log_partition, random_scores


def test_default_sigma():
    assert DEFAULT_SIGMA == 0.95
    assert AmbiguityConfig().sigma == 0.95


def test_worked_example():
    column = np.array([0.0, 0.6, 0.3, 0.08, 0.02])
    assert top_mass_heads(column, 0.95) == [1, 2, 3]


def test_certain_head_gives_singleton():
    column = np.array([0.0, 0.0, 1.0])
    for sigma in (0.1, 0.5, 0.95, 1.0):
        assert top_mass_heads(column, sigma) == [2]


def test_ties_prefer_lower_head():
    assert top_mass_heads(np.array([0.25, 0.25, 0.25, 0.25]), 0.3) == [0, 1]


def test_one_best_arc_is_kept():
    marg = np.zeros((3, 3))
    marg[0, 1], marg[2, 1] = 0.999, 0.001
    marg[0, 2], marg[1, 2] = 0.001, 0.999
    one_best = DependencyTree((2, 0))
    arc_set = build_arc_set(marg, one_best, AmbiguityConfig(0.95))
    assert arc_set.allowed[2, 1] and arc_set.allowed[0, 2]
    assert arc_set.contains_tree(one_best)


def test_sigma_one_covers_support(rng):
    s = random_scores(rng, 4)
    arc_set = build_arc_set(arc_marginals(s), decode(s), AmbiguityConfig(1.0))
    np.testing.assert_array_equal(arc_set.allowed, np.isfinite(s))


def test_sigma_validation():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            AmbiguityConfig(bad)


def _random_marginals(rng, t):
    return arc_marginals(random_scores(rng, t, scale=3.0))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.integers(1, 6), s1=st.floats(0.05, 1.0), s2=st.floats(0.05, 1.0))
def test_coverage_monotone_in_sigma(seed, t, s1, s2):
    lo, hi = sorted((s1, s2))
    marg = _random_marginals(np.random.default_rng(seed), t)
    for m in range(1, t + 1):
        assert set(top_mass_heads(marg[:, m], lo)) <= set(top_mass_heads(marg[:, m], hi))


def _random_set(rng, t):
    allowed = rng.random((t + 1, t + 1)) < 0.5
    return AmbiguousArcSet(allowed)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.integers(1, 5))
def test_union_laws(seed, t):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_set(rng, t) for _ in range(3))
    assert union_arc_sets([a, b]) == union_arc_sets([b, a])
    assert union_arc_sets([union_arc_sets([a, b]), c]) == union_arc_sets([a, union_arc_sets([b, c])])
    assert union_arc_sets([a, a]) == a


def test_union_example():
    def only(*arcs):
        allowed = np.zeros((3, 3), dtype=bool)
        for h, m in arcs:
            allowed[h, m] = True
        return AmbiguousArcSet(allowed)

    a, b, c = (0, 1), (2, 1), (1, 2)
    assert union_arc_sets([only(a, b), only(b, c)]) == only(a, b, c)


def test_union_contains_each_one_best(rng):
    trees = [DependencyTree((2, 0, 2)), DependencyTree((0, 1, 2)), DependencyTree((3, 3, 0))]
    sets = [build_arc_set(_random_marginals(rng, 3), tr) for tr in trees]
    u = union_arc_sets(sets)
    assert all(u.contains_tree(tr) for tr in trees)


def test_union_errors():
    with pytest.raises(ArcSetError):
        union_arc_sets([])
    with pytest.raises(ArcSetError):
        union_arc_sets([AmbiguousArcSet.full(2), AmbiguousArcSet.full(3)])


def test_constrain_full_is_identity(rng):
    s = random_scores(rng, 4)
    np.testing.assert_array_equal(constrain_scores(s, AmbiguousArcSet.full(4)), s)


def test_constrain_single_tree():
    s = random_scores(np.random.default_rng(3), 2)
    tree = DependencyTree((2, 0))
    constrained = constrain_scores(s, AmbiguousArcSet.from_tree(tree))
    for proj in (False, True):
        assert log_partition(constrained, proj) == pytest.approx(tree_score(s, tree.heads), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.integers(1, 5), sigma=st.floats(0.05, 1.0))
def test_constrained_partition_matches_enumeration(seed, t, sigma):
    rng = np.random.default_rng(seed)
    s = random_scores(rng, t)
    for proj in (False, True):
        arc_set = build_arc_set(arc_marginals(s, proj), decode(s, proj), AmbiguityConfig(sigma))
        constrained = constrain_scores(s, arc_set)
        expected = brute_log_partition(s, proj, mask=arc_set.allowed)
        assert log_partition(constrained, proj) == pytest.approx(expected, abs=1e-8)
        # decoding under the constraint always succeeds
        assert arc_set.contains_tree(decode(constrained, proj))
        full = log_partition(s, proj)
        assert log_partition(constrained, proj) <= full + 1e-12
        if arc_set.allowed.sum() < np.isfinite(s).sum():
            assert log_partition(constrained, proj) < full


def test_empty_arc_set_rejected():
    marg = np.zeros((3, 3))
    marg[2, 1] = marg[1, 2] = 1.0  # a cycle with no root
    with pytest.raises(ArcSetError, match="spanning"):
        build_arc_set(marg, None, AmbiguityConfig(include_one_best=False))


def test_file_roundtrip(rng):
    items = []
    for i, t in enumerate((1, 3, 5)):
        s = random_scores(rng, t)
        items.append((f"s{i}", build_arc_set(arc_marginals(s), decode(s))))
    buf = io.StringIO()
    write_arc_sets(items, buf)
    assert buf.getvalue().startswith("# arcsets v1\n")
    back = read_arc_sets(io.StringIO(buf.getvalue()))
    assert [k for k, _ in back] == [k for k, _ in items]
    assert all(a == b for (_, a), (_, b) in zip(items, back))
