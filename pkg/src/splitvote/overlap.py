"""Certified radii when submodel feature sets overlap with fixed spread degree.

With ``phi * T`` fine subsets each feeding ``phi`` of the ``phi * T``
submodels, one perturbed feature corrupts up to ``phi`` votes at once.  The
per-subset damage an attacker can do against a label pair is captured by a
multiset of integers in ``[0, 2*phi]``; the certified radius is the largest
number of subsets whose combined worst-case damage still fits inside the
vote gap, minimized over all challenger labels (the runner-up is not
necessarily the cheapest label to promote here).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import Certificate, overlap_method, top_two
from .errors import DataError, InvalidArgumentError
from .partition import SpreadMap


@dataclass(frozen=True)
class OverlapProfile:
    """Vote tallies of an overlapping ensemble, bucketed by fine subset.

    ``part_counts[y, l]`` counts submodels that use fine subset ``l`` (0-based
    here) and vote ``y``; each column sums to ``phi``.  ``counts`` are the
    global per-label tallies over all ``phi * T`` submodels.
    """

    part_counts: np.ndarray
    counts: tuple[int, ...]
    phi: int

    def __post_init__(self):
        arr = np.asarray(self.part_counts, dtype=np.int64)
        if arr.ndim != 2:
            raise DataError("part_counts must be 2-d (labels x subsets)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "part_counts", arr)
        if (arr < 0).any():
            raise DataError("negative per-subset count")
        if not np.all(arr.sum(axis=0) == self.phi):
            raise DataError("each fine subset must account for exactly phi submodels")
        if sum(self.counts) != arr.shape[1]:
            raise DataError("global counts must sum to phi*T submodels")

    @property
    def num_labels(self) -> int:
        return int(self.part_counts.shape[0])

    @property
    def n_subsets(self) -> int:
        return int(self.part_counts.shape[1])

    @classmethod
    def from_votes(cls, votes, spread: SpreadMap, num_labels: int) -> "OverlapProfile":
        """Bucket one vote per submodel through the spread assignment."""
        n = spread.n_subsets
        if len(votes) != n:
            raise DataError(f"expected {n} submodel votes, got {len(votes)}")
        part_counts = np.zeros((num_labels, n), dtype=np.int64)
        counts = [0] * num_labels
        for l in range(1, n + 1):
            for t in spread.models_for_subset(l):
                part_counts[votes[t - 1], l - 1] += 1
        for v in votes:
            counts[v] += 1
        return cls(part_counts, tuple(counts), spread.phi)


def overlap_multiset(profile: OverlapProfile, y: int, other: int) -> np.ndarray:
    """Per-subset damage terms ``phi + countPart(y, l) - countPart(other, l)``.

    Entry ``l`` is how much the (y, other) vote gap shrinks when the attacker
    seizes subset ``l``: the ``phi`` controlled submodels all switch to
    ``other``, erasing their current ``y`` votes and former ``other`` votes.
    """
    if y == other:
        raise InvalidArgumentError("damage multiset undefined for a label against itself")
    for label in (y, other):
        if not 0 <= label < profile.num_labels:
            raise InvalidArgumentError(f"label {label} outside 0..{profile.num_labels - 1}")
    return profile.phi + profile.part_counts[y] - profile.part_counts[other]


def certify_overlap(profile: OverlapProfile, phi: int) -> Certificate:
    """Largest subset-perturbation count that every challenger label survives.

    For each challenger, sort its damage multiset descending and take the
    longest prefix whose sum fits within the tie-adjusted vote gap.  The
    certificate is the minimum over challengers.  This is a lower bound on
    the true radius (exact certification with overlap is intractable in
    general).
    """
    if phi != profile.phi:
        raise InvalidArgumentError(
            f"profile was built with phi={profile.phi}, got phi={phi}"
        )
    if profile.num_labels < 2:
        raise InvalidArgumentError("overlap certification needs at least two labels")
    leader, _ = top_two(profile.counts)
    radius = profile.n_subsets
    for other in range(profile.num_labels):
        if other == leader:
            continue
        gap = (
            profile.counts[leader]
            - profile.counts[other]
            - (1 if other < leader else 0)
        )
        damage = np.sort(overlap_multiset(profile, leader, other))[::-1]
        running = 0
        survives = 0
        for term in damage:
            running += int(term)
            if running > gap:
                break
            survives += 1
        radius = min(radius, survives)
    return Certificate(label=leader, radius=radius, method=overlap_method(phi))
