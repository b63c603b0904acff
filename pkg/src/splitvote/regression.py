"""Certified interval bounds for median-of-votes regression.

An odd number of real-valued submodel outputs is decided by the exact median.
Whether the median clears a threshold is equivalent to a binary plurality
vote over the thresholded outputs, so the classification certificates carry
over: each one-sided bound is certified on a binarized profile, and the
two-sided certificate is the weaker of the two sides.

Binarization convention: label 0 means "at or below the threshold", label 1
means "above"; an output exactly at the threshold counts as label 0.  The
lower-sided bound is certified on the negated outputs against the negated
threshold so that an output exactly at the lower threshold still counts as
satisfying it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import Certificate, certify_plurality
from .ensemble import VoteProfile
from .errors import InvalidArgumentError, InvalidConfigurationError

METHOD_INTERVAL = "interval"

RULE_ABSOLUTE = "absolute"
RULE_RELATIVE = "relative"


@dataclass(frozen=True)
class IntervalSpec:
    """Target interval for one prediction, in units of the regression target."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise InvalidArgumentError("interval lower bound exceeds upper bound")

    @classmethod
    def absolute(cls, target: float, margin: float) -> "IntervalSpec":
        return cls(target - margin, target + margin)

    @classmethod
    def relative(cls, target: float, fraction: float) -> "IntervalSpec":
        a, b = target - fraction * target, target + fraction * target
        return cls(min(a, b), max(a, b))

    @classmethod
    def from_rule(cls, target: float, kind: str, xi: float) -> "IntervalSpec":
        if kind == RULE_ABSOLUTE:
            return cls.absolute(target, xi)
        if kind == RULE_RELATIVE:
            return cls.relative(target, xi)
        raise InvalidConfigurationError(f"unknown interval rule {kind!r}")


def median_decision(values) -> float:
    """Exact middle order statistic of an odd-length vote multiset."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size % 2 == 0:
        raise InvalidConfigurationError(
            "median decision requires an odd number of votes"
        )
    return float(np.sort(arr)[arr.size // 2])


def binarize(values, threshold: float) -> VoteProfile:
    """Two-label profile: label 0 for votes <= threshold, label 1 above."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size % 2 == 0:
        raise InvalidConfigurationError("binarization requires an odd number of votes")
    votes = tuple(0 if v <= threshold else 1 for v in arr)
    return VoteProfile(votes, num_labels=2)


def certify_upper(values, threshold: float) -> int:
    """Radius of ``median <= threshold`` via the binarized plurality certificate."""
    return certify_plurality(binarize(values, threshold)).radius


def certify_lower(values, threshold: float) -> int:
    """Radius of ``median >= threshold``; the upper bound of the negated votes."""
    neg = [-v for v in np.asarray(values, dtype=np.float64)]
    return certify_plurality(binarize(neg, -threshold)).radius


def certify_interval(values, spec: IntervalSpec) -> Certificate:
    """Two-sided certificate: the weaker of the lower and upper one-sided radii.

    When the median already violates the interval there is nothing to
    certify; the certificate carries the ``-inf`` sentinel that downstream
    metrics expect for failed predictions.
    """
    med = median_decision(values)
    if not spec.lower <= med <= spec.upper:
        return Certificate(
            label=None,
            radius=float("-inf"),
            method=METHOD_INTERVAL,
            value=med,
        )
    radius = min(certify_lower(values, spec.lower), certify_upper(values, spec.upper))
    return Certificate(label=None, radius=radius, method=METHOD_INTERVAL, value=med)
