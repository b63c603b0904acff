"""Deterministic robustness certificates from vote and logit profiles.

Every certificate states: the ensemble's prediction cannot change unless an
adversary perturbs more than ``radius`` feature dimensions, where a dimension
counts once no matter how many training rows or test coordinates it touches.
The worst case assumed throughout is that one perturbed dimension hands the
adversary full control of the submodel owning it.

Four certification routes:

* plurality: half the tie-adjusted vote gap between the top two labels.
* run-off: two-round decisions need the attacker to either win round two
  outright or eject the winner from the top two in round one; the second
  case is bounded by a small dynamic program over vote-gap pairs.
* top-k: greedy vote shifting, tight for plurality top-k membership.
* label-flip tagging: under instance-partitioned training the same radius
  additionally covers training-label flips, so the guarantee tag upgrades.

Tie handling is everywhere "smaller label index wins", which shows up as the
``-1`` indicator adjustment inside the gap arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .ensemble import MODE_INSTANCE, LogitProfile, VoteProfile
from .errors import InvalidArgumentError, InvalidUpgradeError

GUARANTEE_FEATURE = "feature"
GUARANTEE_FEATURE_LABEL_FLIP = "feature+label-flip"

METHOD_PLURALITY = "plurality"
METHOD_RUNOFF = "runoff"


def topk_method(k: int) -> str:
    return f"topk({k})"


def overlap_method(phi: int) -> str:
    return f"overlap({phi})"


@dataclass(frozen=True)
class Certificate:
    """A prediction plus its certified radius and guarantee tag.

    ``label`` is the predicted class index (None for regression, where
    ``value`` carries the median prediction instead).  ``radius`` is a
    non-negative integer except for the regression sentinel ``-inf`` used
    when the prediction already violates its target interval.
    """

    label: int | None
    radius: int | float
    guarantee: str = GUARANTEE_FEATURE
    method: str = METHOD_PLURALITY
    value: float | None = None


def _rank(num_labels: int, tie_order: Sequence[int] | None) -> Sequence[int]:
    """Per-label tie priority; smaller rank wins ties.  Identity by default."""
    if tie_order is None:
        return range(num_labels)
    if sorted(tie_order) != list(range(num_labels)):
        raise InvalidArgumentError("tie_order must be a permutation of the labels")
    rank = [0] * num_labels
    for position, label in enumerate(tie_order):
        rank[label] = position
    return rank


def top_two(counts: Sequence[int], tie_order: Sequence[int] | None = None) -> tuple[int, int]:
    """Plurality and runner-up labels under the tie-break order."""
    if len(counts) < 2:
        raise InvalidArgumentError("need at least two labels")
    rank = _rank(len(counts), tie_order)
    order = sorted(range(len(counts)), key=lambda y: (-counts[y], rank[y]))
    return order[0], order[1]


def _gap_from_counts(
    counts: Sequence[int], y: int, other: int, rank: Sequence[int]
) -> int:
    # Tie-adjusted count difference; evaluates to 0 when y == other.
    return counts[y] - counts[other] - (1 if rank[other] < rank[y] else 0)


def gap_vote(profile: VoteProfile, y: int, other: int) -> int:
    """Vote-count margin of ``y`` over ``other``, minus one if ``other`` wins ties."""
    if y == other:
        raise InvalidArgumentError("vote gap is undefined for a label against itself")
    _check_label(profile.num_labels, y)
    _check_label(profile.num_labels, other)
    return _gap_from_counts(profile.counts, y, other, range(profile.num_labels))


def gap_logit(profile: LogitProfile, y: int, other: int) -> int:
    """Pairwise logit-win margin of ``y`` over ``other`` with the tie adjustment.

    A submodel counts for a label only when its logit is strictly larger, so
    a submodel with exactly equal logits for the pair counts for neither.
    """
    if y == other:
        raise InvalidArgumentError("logit gap is undefined for a label against itself")
    _check_label(profile.num_labels, y)
    _check_label(profile.num_labels, other)
    return (
        profile.logit_win_count(y, other)
        - profile.logit_win_count(other, y)
        - (1 if other < y else 0)
    )


def plurality_radius_from_counts(
    counts: Sequence[int], tie_order: Sequence[int] | None = None
) -> int:
    leader, runner_up = top_two(counts, tie_order)
    rank = _rank(len(counts), tie_order)
    return _gap_from_counts(counts, leader, runner_up, rank) // 2


def certify_plurality(profile: VoteProfile) -> Certificate:
    """Half the vote gap between the plurality and runner-up labels.

    Each adversarial submodel flip moves one vote from the winner to the
    challenger, closing the gap by two; the floor of half the gap is
    therefore exactly the number of flips the prediction survives.
    """
    if profile.num_labels < 2:
        raise InvalidArgumentError("plurality certification needs at least two labels")
    leader, _ = top_two(profile.counts)
    radius = plurality_radius_from_counts(profile.counts)
    return Certificate(label=leader, radius=radius, method=METHOD_PLURALITY)


class DpTable:
    """Memoized pair-elimination bound over clamped vote gaps.

    ``lookup(a, b)`` is the number of submodel perturbations guaranteed
    survivable while at least one of two tracked vote gaps stays
    non-negative.  Base case: zero once both gaps are at most one, except
    (1, 1), where one perturbation is always survivable because a single
    vote flip can only drive one of the two gaps negative.  Otherwise one
    perturbation leads to the worse of (a-2, b-1) and (a-1, b-2): a flipped
    vote lands on one tracked label (gap down two) while merely losing the
    winner's vote against the other (gap down one).

    Arguments below the clamp floor of -2 behave identically to -2, which
    keeps the table finite without changing any value.
    """

    CLAMP = -2

    def __init__(self, max_gap: int):
        if max_gap < 0:
            raise InvalidArgumentError("table size must cover gaps >= 0")
        self.max_gap = max_gap
        size = max_gap - self.CLAMP + 1
        table = np.zeros((size, size), dtype=np.int64)
        for a in range(self.CLAMP, max_gap + 1):
            for b in range(self.CLAMP, max_gap + 1):
                if max(a, b) <= 1 and (a, b) != (1, 1):
                    continue
                left = table[self._idx(a - 2), self._idx(b - 1)]
                right = table[self._idx(a - 1), self._idx(b - 2)]
                table[self._idx(a), self._idx(b)] = 1 + min(left, right)
        self._table = table

    def _idx(self, gap: int) -> int:
        return max(gap, self.CLAMP) - self.CLAMP

    def lookup(self, gap_a: int, gap_b: int) -> int:
        if max(gap_a, gap_b) > self.max_gap:
            raise InvalidArgumentError(
                f"gap exceeds table capacity {self.max_gap}"
            )
        return int(self._table[self._idx(gap_a), self._idx(gap_b)])


def dp(gap_a: int, gap_b: int, table: DpTable) -> int:
    return table.lookup(gap_a, gap_b)


def certify_runoff(
    votes: VoteProfile, logits: LogitProfile, table: DpTable | None = None
) -> Certificate:
    """Certified radius for the two-round run-off decision.

    The radius is the smaller of two attack costs: overtaking the winner in
    round two (per-challenger max of a vote-gap floor and a logit-gap
    floor), and ejecting the winner from round one's top two (pair minimum
    of the dynamic-programming bound over vote gaps).  The pair minimum
    ranges over all label pairs other than the winner, repetitions included,
    which for binary problems leaves the single diagonal pair.
    """
    num_labels = votes.num_labels
    if num_labels < 2:
        raise InvalidArgumentError("run-off certification needs at least two labels")
    if logits.num_labels != num_labels or logits.num_models != votes.num_models:
        raise InvalidArgumentError("vote and logit profiles disagree on shape")
    counts = votes.counts
    identity = range(num_labels)
    leader, runner_up = top_two(counts)
    winner = leader if gap_logit(logits, leader, runner_up) >= 0 else runner_up
    other_finalist = runner_up if winner == leader else leader

    rivals = [y for y in range(num_labels) if y != winner]

    r_overtake = min(
        max(
            _gap_from_counts(counts, other_finalist, y, identity) // 2,
            gap_logit(logits, winner, y) // 2,
        )
        for y in rivals
    )

    if table is None:
        table = DpTable(votes.num_models)
    r_eject = min(
        table.lookup(
            _gap_from_counts(counts, winner, rivals[i], identity),
            _gap_from_counts(counts, winner, rivals[j], identity),
        )
        for i in range(len(rivals))
        for j in range(i, len(rivals))
    )

    return Certificate(
        label=winner, radius=min(r_overtake, r_eject), method=METHOD_RUNOFF
    )


def topk_membership(counts: Sequence[int], y: int, k: int) -> bool:
    """Whether ``y`` sits among the ``k`` best labels (smaller index wins ties)."""
    ahead = sum(
        1
        for other in range(len(counts))
        if other != y
        and (counts[other] > counts[y] or (counts[other] == counts[y] and other < y))
    )
    return ahead < k


def certify_topk(profile: VoteProfile, y: int, k: int) -> int:
    """Greedy radius for ``y`` remaining in the top-``k`` vote labels.

    Repeatedly performs the attacker's best move: drain a vote from ``y``
    (or from the current plurality label once ``y`` is empty) and hand it to
    the label just outside the top ``k``.  The number of completed moves
    before ``y`` drops out is the certified radius; ``-1`` means ``y`` was
    not in the top ``k`` to begin with.
    """
    num_labels = profile.num_labels
    _check_label(num_labels, y)
    if k < 1 or k >= profile.num_models:
        raise InvalidArgumentError("k must satisfy 1 <= k < T")
    if k >= num_labels:
        raise InvalidArgumentError(
            "top-k certification needs k < num_labels; membership is vacuous otherwise"
        )
    counts = list(profile.counts)
    radius = -1
    while topk_membership(counts, y, k):
        order = sorted(range(num_labels), key=lambda lbl: (-counts[lbl], lbl))
        boundary = order[k]
        if counts[y] > 0:
            counts[y] -= 1
        else:
            counts[order[0]] -= 1
        counts[boundary] += 1
        radius += 1
    return radius


def tag_label_flip(cert: Certificate, mode: str) -> Certificate:
    """Upgrade a certificate's guarantee to cover training-label flips.

    Only valid for instance-partitioned training, where each training row
    (and hence each label) reaches exactly one submodel; the numeric radius
    is unchanged and now divides arbitrarily between feature perturbations
    and label flips.
    """
    if mode != MODE_INSTANCE:
        raise InvalidUpgradeError(
            f"label-flip guarantees require {MODE_INSTANCE!r} training, got {mode!r}"
        )
    return replace(cert, guarantee=GUARANTEE_FEATURE_LABEL_FLIP)


def _check_label(num_labels: int, y: int) -> None:
    if not 0 <= y < num_labels:
        raise InvalidArgumentError(f"label {y} outside 0..{num_labels - 1}")
