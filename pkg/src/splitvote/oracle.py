"""Exhaustive worst-case adversaries used to ground-truth the certificates.

The adversary controls a set of submodels (or fine feature subsets in the
overlapping construction) and may replace each controlled submodel's output
arbitrarily.  Stability at budget ``m`` means the ensemble decision survives
every such replacement.  Enumeration is exact:

* for vote-level decisions, a controlled submodel contributes one arbitrary
  label; since the decision depends only on label tallies, assignments are
  enumerated as multisets of labels, which covers every concrete assignment;
* for run-off, a controlled submodel's logits are abstracted to a weak order
  over the labels (possible ties), which determines both its vote and every
  pairwise strict comparison; all weak orders are enumerated.

Keeping one's original output is always among the replacements, so checking
budget ``m`` exactly covers all budgets up to ``m``.  These searches are
exponential; the caps keep them to small ensembles by design.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .ensemble import LogitProfile, VoteProfile, plurality_runner_up
from .errors import CapacityError, InvalidArgumentError
from .partition import SpreadMap

DEFAULT_MAX_MODELS = 9
DEFAULT_MAX_LABELS = 4


@dataclass(frozen=True)
class OracleCaps:
    """Upper limits for exhaustive search; costs grow as (labels+1)^models."""

    max_models: int = DEFAULT_MAX_MODELS
    max_labels: int = DEFAULT_MAX_LABELS


def _check_caps(num_models: int, num_labels: int, caps: OracleCaps) -> None:
    if num_models > caps.max_models:
        raise CapacityError(
            f"{num_models} submodels exceed the exhaustive-search cap {caps.max_models}"
        )
    if num_labels > caps.max_labels:
        raise CapacityError(
            f"{num_labels} labels exceed the exhaustive-search cap {caps.max_labels}"
        )


def _check_budget(m: int, num_models: int) -> None:
    if m < 0 or m > num_models:
        raise InvalidArgumentError(f"budget {m} outside 0..{num_models}")


def _winner(counts) -> int:
    best = 0
    for y in range(1, len(counts)):
        if counts[y] > counts[best]:
            best = y
    return best


def _in_topk(counts, y: int, k: int) -> bool:
    order = sorted(range(len(counts)), key=lambda lbl: (-counts[lbl], lbl))
    return y in order[:k]


def oracle_plurality(
    profile: VoteProfile, m: int, caps: OracleCaps = OracleCaps()
) -> bool:
    """True iff no reassignment of up to ``m`` votes changes the plurality label."""
    counts = list(profile.counts)
    num_labels = profile.num_labels
    num_models = profile.num_models
    _check_caps(num_models, num_labels, caps)
    _check_budget(m, num_models)
    base = _winner(counts)
    labels = range(num_labels)
    for controlled in itertools.combinations(range(num_models), m):
        removed = [0] * num_labels
        for t in controlled:
            removed[profile.votes[t]] += 1
        for assignment in itertools.combinations_with_replacement(labels, m):
            trial = [c - r for c, r in zip(counts, removed)]
            for lbl in assignment:
                trial[lbl] += 1
            if _winner(trial) != base:
                return False
    return True


def oracle_topk(
    profile: VoteProfile, y: int, k: int, m: int, caps: OracleCaps = OracleCaps()
) -> bool:
    """True iff ``y`` stays in the top ``k`` under every ``m``-vote reassignment."""
    counts = list(profile.counts)
    num_labels = profile.num_labels
    num_models = profile.num_models
    _check_caps(num_models, num_labels, caps)
    _check_budget(m, num_models)
    if not 0 <= y < num_labels:
        raise InvalidArgumentError(f"label {y} outside 0..{num_labels - 1}")
    labels = range(num_labels)
    for controlled in itertools.combinations(range(num_models), m):
        removed = [0] * num_labels
        for t in controlled:
            removed[profile.votes[t]] += 1
        for assignment in itertools.combinations_with_replacement(labels, m):
            trial = [c - r for c, r in zip(counts, removed)]
            for lbl in assignment:
                trial[lbl] += 1
            if not _in_topk(trial, y, k):
                return False
    return True


@lru_cache(maxsize=None)
def weak_orders(num_labels: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """All weak orders over the labels as (vote, strict-win matrix) pairs.

    A weak order is encoded by a rank per label (rank 0 best, ties allowed,
    ranks forming a prefix 0..j).  The induced vote is the smallest-index
    label of rank 0; entry ``a * K + b`` of the win matrix is 1 iff ``a``
    ranks strictly above ``b``.
    """
    out = []
    for ranks in itertools.product(range(num_labels), repeat=num_labels):
        used = set(ranks)
        if used != set(range(len(used))):
            continue
        vote = next(i for i in range(num_labels) if ranks[i] == 0)
        wins = tuple(
            1 if ranks[a] < ranks[b] else 0
            for a in range(num_labels)
            for b in range(num_labels)
        )
        out.append((vote, wins))
    return tuple(out)


def _runoff_winner(counts, wins, num_labels: int) -> int:
    leader, runner_up = plurality_runner_up(counts)
    gap = (
        wins[leader * num_labels + runner_up]
        - wins[runner_up * num_labels + leader]
        - (1 if runner_up < leader else 0)
    )
    return leader if gap >= 0 else runner_up


def oracle_runoff(
    votes: VoteProfile,
    logits: LogitProfile,
    m: int,
    caps: OracleCaps = OracleCaps(),
) -> bool:
    """True iff the run-off winner survives every ``m``-submodel takeover.

    A taken-over submodel adopts an arbitrary weak order, which fixes its
    vote and all of its pairwise logit comparisons simultaneously.
    """
    num_labels = votes.num_labels
    num_models = votes.num_models
    _check_caps(num_models, num_labels, caps)
    _check_budget(m, num_models)
    if logits.num_models != num_models or logits.num_labels != num_labels:
        raise InvalidArgumentError("vote and logit profiles disagree on shape")

    contrib = []
    for t in range(num_models):
        row = logits.logits[t]
        wins = tuple(
            1 if row[a] > row[b] else 0
            for a in range(num_labels)
            for b in range(num_labels)
        )
        contrib.append((votes.votes[t], wins))

    counts = list(votes.counts)
    total_wins = [0] * (num_labels * num_labels)
    for _, wins in contrib:
        for i, w in enumerate(wins):
            total_wins[i] += w
    base = _runoff_winner(counts, total_wins, num_labels)

    orders = weak_orders(num_labels)
    size = num_labels * num_labels
    for controlled in itertools.combinations(range(num_models), m):
        rem_counts = list(counts)
        rem_wins = list(total_wins)
        for t in controlled:
            vote, wins = contrib[t]
            rem_counts[vote] -= 1
            for i in range(size):
                rem_wins[i] -= wins[i]
        for assignment in itertools.combinations_with_replacement(orders, m):
            trial_counts = list(rem_counts)
            trial_wins = list(rem_wins)
            for vote, wins in assignment:
                trial_counts[vote] += 1
                for i in range(size):
                    trial_wins[i] += wins[i]
            if _runoff_winner(trial_counts, trial_wins, num_labels) != base:
                return False
    return True


def oracle_overlap(
    votes,
    spread: SpreadMap,
    num_labels: int,
    m: int,
    caps: OracleCaps = OracleCaps(),
) -> bool:
    """True iff the plurality label survives seizing any ``m`` fine subsets.

    Seizing a subset corrupts the ``phi`` submodels that use it; corrupted
    submodels vote arbitrarily.
    """
    n_subsets = spread.n_subsets
    _check_caps(n_subsets, num_labels, caps)
    if m < 0 or m > n_subsets:
        raise InvalidArgumentError(f"budget {m} outside 0..{n_subsets}")
    counts = [0] * num_labels
    for v in votes:
        counts[v] += 1
    base = _winner(counts)
    labels = range(num_labels)
    for seized in itertools.combinations(range(1, n_subsets + 1), m):
        corrupted: set[int] = set()
        for l in seized:
            corrupted.update(spread.models_for_subset(l))
        rem = list(counts)
        for t in corrupted:
            rem[votes[t - 1]] -= 1
        for assignment in itertools.combinations_with_replacement(
            labels, len(corrupted)
        ):
            trial = list(rem)
            for lbl in assignment:
                trial[lbl] += 1
            if _winner(trial) != base:
                return False
    return True


def max_stable_plurality(profile: VoteProfile, caps: OracleCaps = OracleCaps()) -> int:
    """Largest budget at which the plurality label is provably unbreakable."""
    for m in range(profile.num_models + 1):
        if not oracle_plurality(profile, m, caps):
            return m - 1
    return profile.num_models


def max_stable_runoff(
    votes: VoteProfile, logits: LogitProfile, caps: OracleCaps = OracleCaps()
) -> int:
    for m in range(votes.num_models + 1):
        if not oracle_runoff(votes, logits, m, caps):
            return m - 1
    return votes.num_models


def max_stable_topk(
    profile: VoteProfile, y: int, k: int, caps: OracleCaps = OracleCaps()
) -> int:
    """Largest stable budget, or -1 when ``y`` is not in the top k to begin with."""
    for m in range(profile.num_models + 1):
        if not oracle_topk(profile, y, k, m, caps):
            return m - 1
    return profile.num_models


def max_stable_overlap(
    votes, spread: SpreadMap, num_labels: int, caps: OracleCaps = OracleCaps()
) -> int:
    for m in range(spread.n_subsets + 1):
        if not oracle_overlap(votes, spread, num_labels, m, caps):
            return m - 1
    return spread.n_subsets


# ---------------------------------------------------------------------------
# Profile generators for sweeps
# ---------------------------------------------------------------------------


def enumerate_count_vectors(num_models: int, num_labels: int):
    """All per-label count vectors summing to the submodel count."""
    if num_labels == 1:
        yield (num_models,)
        return
    for first in range(num_models + 1):
        for rest in enumerate_count_vectors(num_models - first, num_labels - 1):
            yield (first,) + rest


def random_vote_profile(rng, num_models: int, num_labels: int) -> VoteProfile:
    votes = tuple(int(v) for v in rng.integers(0, num_labels, size=num_models))
    return VoteProfile(votes, num_labels=num_labels)


def random_logit_profile(
    rng, num_models: int, num_labels: int
) -> tuple[VoteProfile, LogitProfile]:
    """Random continuous logits; exact ties have probability zero."""
    logits = LogitProfile(rng.random((num_models, num_labels)))
    votes = VoteProfile(logits.votes(), num_labels=num_labels)
    return votes, logits
