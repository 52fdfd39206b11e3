"""Equivalence relations, entropy, capacity and the refinement order."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from leakbound.metrics import (
    Distribution, EquivalenceRelation, PolicyThreshold, breaches, channel_capacity,
    is_noninterfering, loi_leq, merge_relations, shannon_entropy,
)


def partitions_of(points):
    """Hypothesis strategy: a random partition of ``points`` (block labels per point)."""
    return st.lists(st.integers(0, len(points) - 1), min_size=len(points), max_size=len(points)).map(
        lambda labels: EquivalenceRelation.from_observations(zip(points, labels)))


DOMAIN = list(range(8))


def test_relation_basics():
    rel = EquivalenceRelation([[1, 2], [3]])
    assert rel.class_count == len(rel) == 2
    assert rel.related(1, 2) and not rel.related(1, 3)
    assert rel.class_of(3) == frozenset({3})
    assert rel == EquivalenceRelation([[3], [2, 1]])
    assert hash(rel) == hash(EquivalenceRelation([[3], [2, 1]]))
    with pytest.raises(ValueError, match="two classes"):
        EquivalenceRelation([[1, 2], [2]])
    with pytest.raises(ValueError, match="non-empty"):
        EquivalenceRelation([[1], []])


def test_top_bottom_and_noninterference():
    bottom, top = EquivalenceRelation.bottom(DOMAIN), EquivalenceRelation.top(DOMAIN)
    assert is_noninterfering(bottom) and not is_noninterfering(top)
    assert loi_leq(bottom, top) and not loi_leq(top, bottom)
    assert shannon_entropy(bottom) == 0.0
    assert shannon_entropy(top) == 3.0


def test_entropy_frozen_values():
    mod4 = EquivalenceRelation.from_function(range(16), lambda h: h % 4)
    assert shannon_entropy(mod4) == 2.0
    evens = Distribution(points={h: Fraction(1, 8) if h % 2 == 0 else 0 for h in range(16)})
    assert shannon_entropy(mod4, evens) == 1.0
    two = EquivalenceRelation([["a"], ["b"]])
    h = shannon_entropy(two, [2.0 ** -64, 1 - 2.0 ** -64])
    assert h == pytest.approx(3.469446951953614e-18, rel=1e-12)
    # exact evaluation keeps the second (tiny) term as well
    exact = shannon_entropy(two, [Fraction(1, 2 ** 64), 1 - Fraction(1, 2 ** 64)], precise=True)
    assert exact == pytest.approx(3.469446951953614e-18 + 7.820637090558988e-20, rel=1e-9)
    assert shannon_entropy(EquivalenceRelation([[1], [2], [3]]), [0.5, 0.25, 0.25]) == 1.5


def test_capacity_and_policy():
    assert channel_capacity(1) == 0.0
    assert channel_capacity(3) == pytest.approx(1.584962500721156)
    with pytest.raises(ValueError):
        channel_capacity(0)
    rel = EquivalenceRelation([[1], [2], [3]])
    assert breaches(rel, 2) and not breaches(rel, PolicyThreshold(3))
    with pytest.raises(ValueError):
        PolicyThreshold(-1)


def test_distribution_validation():
    with pytest.raises(ValueError, match="sum"):
        Distribution(points={1: 0.5})
    with pytest.raises(ValueError, match="non-negative"):
        Distribution(classes={0: 1.5, 1: -0.5})
    with pytest.raises(ValueError):
        Distribution()


def test_incomparable_domains():
    with pytest.raises(ValueError):
        loi_leq(EquivalenceRelation.top([1, 2]), EquivalenceRelation.top([1, 3]))


def test_merge_requires_observations_and_matching_lows():
    with pytest.raises(ValueError):
        merge_relations([EquivalenceRelation([[1]])])
    a = EquivalenceRelation.from_observations([(1, "x")], fixed_low=(0,))
    b = EquivalenceRelation.from_observations([(2, "x")], fixed_low=(1,))
    with pytest.raises(ValueError, match="different low"):
        merge_relations([a, b])
    merged = merge_relations([a, EquivalenceRelation.from_observations([(2, "x"), (3, "y")], fixed_low=(0,))])
    assert merged == EquivalenceRelation([[1, 2], [3]], (0,))


@given(partitions_of(DOMAIN), partitions_of(DOMAIN))
def test_meet_refines_both(a, b):
    """Pairing observations gives the least upper bound in the refinement order."""
    joint = EquivalenceRelation.from_function(DOMAIN, lambda x: (a.classes.index(a.class_of(x)),
                                                                b.classes.index(b.class_of(x))))
    assert loi_leq(a, joint) and loi_leq(b, joint)
    assert joint.class_count <= a.class_count * b.class_count


@given(partitions_of(DOMAIN), partitions_of(DOMAIN),
       st.lists(st.integers(1, 100), min_size=len(DOMAIN), max_size=len(DOMAIN)))
def test_refinement_implies_monotone_measures(a, b, weights):
    total = sum(weights)
    dist = Distribution(points={x: Fraction(w, total) for x, w in zip(DOMAIN, weights)})
    if loi_leq(a, b):
        assert a.class_count <= b.class_count
        assert shannon_entropy(a, dist) <= shannon_entropy(b, dist) + 1e-12
    for rel in (a, b):
        assert shannon_entropy(rel, dist) <= math.log2(rel.class_count) + 1e-12
        assert shannon_entropy(rel) <= channel_capacity(rel.class_count) + 1e-12


@given(partitions_of(DOMAIN))
def test_uniform_entropy_reaches_capacity_for_equal_classes(rel):
    sizes = {len(c) for c in rel.classes}
    if len(sizes) == 1:
        assert shannon_entropy(rel) == pytest.approx(channel_capacity(rel.class_count))
