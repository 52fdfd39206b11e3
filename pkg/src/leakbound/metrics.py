"""Lattice-of-information measures over explicit equivalence relations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Optional, Union

Number = Union[float, Fraction, int]


class EquivalenceRelation:
    """A partition of a finite domain of (high-input) points.

    ``observations`` optionally records, per class, the observation that
    all its members produce.  Equality ignores class order.
    """

    __slots__ = ("classes", "fixed_low", "observations", "_index")

    def __init__(self, classes: Iterable[Iterable[Hashable]], fixed_low: tuple = (),
                 observations: Optional[Iterable] = None):
        self.classes = tuple(frozenset(c) for c in classes)
        self.fixed_low = tuple(fixed_low)
        self.observations = tuple(observations) if observations is not None else None
        if self.observations is not None and len(self.observations) != len(self.classes):
            raise ValueError("one observation per class is required")
        index = {}
        for i, c in enumerate(self.classes):
            if not c:
                raise ValueError("equivalence classes must be non-empty")
            for x in c:
                if x in index:
                    raise ValueError(f"point {x!r} appears in two classes")
                index[x] = i
        self._index = index

    @classmethod
    def from_observations(cls, pairs: Iterable[tuple], fixed_low: tuple = ()) -> "EquivalenceRelation":
        """Group ``(point, observation)`` pairs by observation, in first-seen order."""
        groups: dict = {}
        for point, obs in pairs:
            groups.setdefault(obs, []).append(point)
        return cls(groups.values(), fixed_low, groups.keys())

    @classmethod
    def from_function(cls, domain: Iterable, f) -> "EquivalenceRelation":
        return cls.from_observations((x, f(x)) for x in domain)

    @classmethod
    def bottom(cls, domain: Iterable) -> "EquivalenceRelation":
        """The relation relating every point (one class)."""
        return cls([list(domain)])

    @classmethod
    def top(cls, domain: Iterable) -> "EquivalenceRelation":
        """The identity relation (singleton classes)."""
        return cls([[x] for x in domain])

    @property
    def domain(self) -> frozenset:
        return frozenset(self._index)

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def class_of(self, point) -> frozenset:
        return self.classes[self._index[point]]

    def related(self, a, b) -> bool:
        return self._index[a] == self._index[b]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EquivalenceRelation):
            return NotImplemented
        return set(self.classes) == set(other.classes) and self.fixed_low == other.fixed_low

    def __hash__(self) -> int:
        return hash((frozenset(self.classes), self.fixed_low))

    def __repr__(self) -> str:
        return f"EquivalenceRelation({len(self.classes)} classes over {len(self._index)} points, low={self.fixed_low})"


def merge_relations(parts: Iterable[EquivalenceRelation]) -> EquivalenceRelation:
    """Combine relations computed over disjoint domain shards (same low input).

    Classes are joined by observation; the result does not depend on the order
    or grouping of the shards.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    low = parts[0].fixed_low
    groups: dict = {}
    for p in parts:
        if p.observations is None:
            raise ValueError("merging needs relations that carry observations")
        if p.fixed_low != low:
            raise ValueError("shards were computed for different low inputs")
        for cls_, obs in zip(p.classes, p.observations):
            groups.setdefault(obs, set()).update(cls_)
    keys = sorted(groups, key=repr)
    return EquivalenceRelation([groups[k] for k in keys], low, keys)


@dataclass(frozen=True)
class PolicyThreshold:
    """A quantitative policy: at most ``n`` distinctions are allowed."""

    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("a policy is a non-negative number of distinctions")


class Distribution:
    """Probability weights over domain points or directly over classes.

    Exactly one of ``points`` (point -> weight) or ``classes`` (class index ->
    weight) is normally given; when both are, the per-class weights win.
    """

    def __init__(self, points: Optional[Mapping] = None, classes: Optional[Mapping[int, Number]] = None,
                 tolerance: float = 1e-9):
        if points is None and classes is None:
            raise ValueError("a distribution needs point or class weights")
        self.points = dict(points) if points is not None else None
        self.classes = dict(classes) if classes is not None else None
        for weights in (self.points, self.classes):
            if weights is None:
                continue
            if any(w < 0 for w in weights.values()):
                raise ValueError("weights must be non-negative")
            total = sum(weights.values())
            if abs(total - 1) > tolerance:
                raise ValueError(f"weights sum to {float(total)!r}, not 1")

    @classmethod
    def uniform(cls, domain: Iterable) -> "Distribution":
        domain = list(domain)
        p = Fraction(1, len(domain))
        return cls(points={x: p for x in domain})

    def class_weights(self, rel: EquivalenceRelation) -> list:
        if self.classes is not None:
            return [self.classes.get(i, 0) for i in range(len(rel.classes))]
        weights = [0] * len(rel.classes)
        for x, w in self.points.items():
            weights[rel._index[x]] += w
        return weights


def _as_distribution(rel, dist):
    if dist is None:
        return Distribution.uniform(rel.domain)
    if isinstance(dist, Distribution):
        return dist
    return Distribution(classes=dict(enumerate(dist)))


def shannon_entropy(rel: EquivalenceRelation, dist=None, precise: bool = False) -> float:
    """H = sum over classes of -p log2 p (uniform over the domain when ``dist`` is None).

    ``dist`` may be a :class:`Distribution` or a sequence of class
    probabilities.  The default evaluation uses doubles: each class
    probability is rounded to a double first, so ``1 - 2**-64`` becomes 1.0
    and contributes exactly zero.  With ``precise=True`` the probabilities are
    kept exact and the logarithms evaluated with 60 significant digits.
    """
    weights = _as_distribution(rel, dist).class_weights(rel)
    if precise:
        import mpmath

        with mpmath.workdps(60):
            h = mpmath.mpf(0)
            for w in weights:
                if w:
                    p = mpmath.mpf(Fraction(w).numerator) / Fraction(w).denominator
                    h -= p * mpmath.log(p, 2)
            return float(h)
    h = 0.0
    for w in weights:
        p = float(w)
        if p > 0.0:
            h -= p * math.log2(p)
    return h + 0.0


def channel_capacity(class_count: int) -> float:
    """Maximum leakage over all input distributions: log2 of the class count."""
    if class_count < 1:
        raise ValueError("class count must be positive")
    return math.log2(class_count)


def loi_leq(coarser: EquivalenceRelation, finer: EquivalenceRelation) -> bool:
    """Refinement order: True iff every class of ``finer`` lies inside a class of ``coarser``."""
    if coarser.domain != finer.domain:
        raise ValueError("relations over different domains are not comparable")
    for c in finer.classes:
        first = next(iter(c))
        if not c <= coarser.class_of(first):
            return False
    return True


def is_noninterfering(rel: EquivalenceRelation) -> bool:
    return len(rel.classes) == 1


def breaches(rel: EquivalenceRelation, policy: PolicyThreshold | int) -> bool:
    n = policy.n if isinstance(policy, PolicyThreshold) else policy
    return len(rel.classes) > n
