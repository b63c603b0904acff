"""Feature subset assignment for voting ensembles.

Two constructions are provided:

* disjoint partitions of the feature set (strided or balanced random), one
  subset per submodel;
* overlapping assignments built from a fine partition into ``phi * T``
  disjoint subsets plus a spread map that hands each fine subset to exactly
  ``phi`` submodels, so every feature is seen by ``phi`` submodels.

Feature indices are 1-based in memory (matching the usual 1..d convention for
feature dimensions); files written to disk use 0-based indices, noted in the
schema.  All randomized constructions are deterministic functions of their
seed; the generator algorithm is recorded alongside the seed so partitions
can be reproduced elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigurationError

RNG_ALGORITHM = "numpy-pcg64"

PARTITION_SCHEMA_VERSION = 1

KIND_DISJOINT = "disjoint"
KIND_OVERLAPPING = "overlapping"


@dataclass(frozen=True)
class SpreadMap:
    """Assignment of fine feature subsets to submodels with fixed spread degree.

    With ``phi * num_models`` fine subsets and the same number of submodels,
    subset ``l`` is used by the submodels ``{(tau + l) mod phi*T : tau in
    offsets}`` (residue 0 maps back to ``phi*T`` so indices stay in
    ``1..phi*T``).  Every subset lands on exactly ``phi`` distinct submodels
    and every submodel receives exactly ``phi`` subsets.
    """

    phi: int
    num_models: int
    offsets: tuple[int, ...]
    seed: int | None = None
    rng_algorithm: str | None = None

    @property
    def n_subsets(self) -> int:
        return self.phi * self.num_models

    def models_for_subset(self, subset_index: int) -> frozenset[int]:
        """Submodel indices (1-based) that use the given fine subset."""
        n = self.n_subsets
        if not 1 <= subset_index <= n:
            raise InvalidConfigurationError(
                f"subset index {subset_index} outside 1..{n}"
            )
        return frozenset(
            ((tau + subset_index - 1) % n) + 1 for tau in self.offsets
        )

    def subsets_for_model(self, model_index: int) -> frozenset[int]:
        """Fine subset indices (1-based) assigned to the given submodel."""
        n = self.n_subsets
        if not 1 <= model_index <= n:
            raise InvalidConfigurationError(
                f"submodel index {model_index} outside 1..{n}"
            )
        return frozenset(
            ((model_index - tau - 1) % n) + 1 for tau in self.offsets
        )

    def validate(self) -> None:
        if self.phi < 1:
            raise InvalidConfigurationError("spread degree must be >= 1")
        if self.num_models < 1:
            raise InvalidConfigurationError("submodel count must be >= 1")
        if len(set(self.offsets)) != self.phi:
            raise InvalidConfigurationError(
                f"expected {self.phi} distinct offsets, got {self.offsets}"
            )
        n = self.n_subsets
        per_model: dict[int, int] = {}
        for l in range(1, n + 1):
            models = self.models_for_subset(l)
            if len(models) != self.phi:
                raise InvalidConfigurationError(
                    f"subset {l} mapped to {len(models)} submodels, expected {self.phi}"
                )
            for t in models:
                per_model[t] = per_model.get(t, 0) + 1
        if any(c != self.phi for c in per_model.values()) or len(per_model) != n:
            raise InvalidConfigurationError("spread map is not phi-regular")


@dataclass(frozen=True)
class FeaturePartition:
    """Feature-index subsets backing an ensemble.

    ``subsets`` holds 1-based feature indices.  For the disjoint kind there
    is one subset per submodel.  For the overlapping kind ``subsets`` is the
    fine partition into ``phi * T`` pieces and ``spread`` distributes those
    pieces; the effective per-submodel feature sets are unions of fine
    subsets.
    """

    num_features: int
    subsets: tuple[frozenset[int], ...]
    kind: str = KIND_DISJOINT
    spread: SpreadMap | None = None
    seed: int | None = None
    rng_algorithm: str | None = None

    @property
    def ensemble_size(self) -> int:
        """Number of submodels this partition supports."""
        return len(self.subsets)

    def effective_sets(self) -> tuple[frozenset[int], ...]:
        """Per-submodel feature sets (1-based indices)."""
        if self.kind == KIND_DISJOINT:
            return self.subsets
        assert self.spread is not None
        out = []
        for t in range(1, self.spread.n_subsets + 1):
            acc: set[int] = set()
            for l in self.spread.subsets_for_model(t):
                acc.update(self.subsets[l - 1])
            out.append(frozenset(acc))
        return tuple(out)

    def columns(self, model_index: int) -> np.ndarray:
        """Sorted 0-based column indices used by submodel ``model_index`` (1-based)."""
        feats = self.effective_sets()[model_index - 1]
        return np.array(sorted(j - 1 for j in feats), dtype=np.intp)

    def validate(self) -> None:
        d = self.num_features
        if d < 1:
            raise InvalidConfigurationError("feature count must be >= 1")
        universe: set[int] = set()
        total = 0
        for s in self.subsets:
            if any(not 1 <= j <= d for j in s):
                raise InvalidConfigurationError("feature index outside 1..d")
            total += len(s)
            universe.update(s)
        if total != d or universe != set(range(1, d + 1)):
            raise InvalidConfigurationError(
                "subsets must be pairwise disjoint and cover 1..d"
            )
        if self.kind == KIND_DISJOINT:
            if self.spread is not None:
                raise InvalidConfigurationError("disjoint partition cannot carry a spread map")
            if len(self.subsets) <= d and any(len(s) == 0 for s in self.subsets):
                raise InvalidConfigurationError("empty subset in disjoint partition")
        elif self.kind == KIND_OVERLAPPING:
            if self.spread is None:
                raise InvalidConfigurationError("overlapping partition requires a spread map")
            self.spread.validate()
            if len(self.subsets) != self.spread.n_subsets:
                raise InvalidConfigurationError(
                    "fine subset count does not match the spread map"
                )
            phi = self.spread.phi
            usage: dict[int, int] = {j: 0 for j in range(1, d + 1)}
            for eff in self.effective_sets():
                for j in eff:
                    usage[j] += 1
            if any(c != phi for c in usage.values()):
                raise InvalidConfigurationError(
                    f"every feature must be used by exactly {phi} submodels"
                )
        else:
            raise InvalidConfigurationError(f"unknown partition kind {self.kind!r}")


def strided_partition(num_features: int, num_models: int) -> FeaturePartition:
    """Deterministic partition placing feature ``j`` in subset ``(j mod T) + 1``.

    Subset ``t`` receives exactly the features ``{j : j mod T == t - 1}``, so
    consecutive features land on different submodels.
    """
    _check_counts(num_features, num_models)
    subsets = tuple(
        frozenset(j for j in range(1, num_features + 1) if j % num_models == t - 1)
        for t in range(1, num_models + 1)
    )
    part = FeaturePartition(num_features, subsets, KIND_DISJOINT)
    part.validate()
    return part


def random_partition(num_features: int, num_models: int, seed: int) -> FeaturePartition:
    """Balanced uniform-random partition; subset sizes differ by at most one."""
    _check_counts(num_features, num_models)
    rng = np.random.default_rng(seed)
    order = rng.permutation(num_features) + 1
    base, extra = divmod(num_features, num_models)
    subsets = []
    pos = 0
    for t in range(num_models):
        size = base + (1 if t < extra else 0)
        subsets.append(frozenset(int(j) for j in order[pos : pos + size]))
        pos += size
    part = FeaturePartition(
        num_features,
        tuple(subsets),
        KIND_DISJOINT,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM,
    )
    part.validate()
    return part


def spread_assignment(num_models: int, phi: int, seed: int) -> SpreadMap:
    """Draw the offset set for a phi-regular subset-to-submodel assignment.

    The ``phi`` offsets are sampled uniformly without replacement from
    ``1..phi*T``; the full assignment follows by modular shifts, so the map
    is phi-regular by construction.
    """
    if phi < 1:
        raise InvalidConfigurationError("spread degree must be >= 1")
    if num_models < 1:
        raise InvalidConfigurationError("submodel count must be >= 1")
    rng = np.random.default_rng(seed)
    n = phi * num_models
    offsets = tuple(sorted(int(v) + 1 for v in rng.choice(n, size=phi, replace=False)))
    smap = SpreadMap(
        phi=phi,
        num_models=num_models,
        offsets=offsets,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM,
    )
    smap.validate()
    return smap


def overlapping_partition(
    num_features: int, num_models: int, phi: int, seed: int
) -> tuple[FeaturePartition, SpreadMap]:
    """Fine random partition into ``phi*T`` subsets plus its spread map.

    Requires ``phi*T <= d``; otherwise some fine subset would be empty by
    pigeonhole.  Submodel ``t``'s effective feature set is the union of the
    ``phi`` fine subsets assigned to it.
    """
    if phi < 1:
        raise InvalidConfigurationError("spread degree must be >= 1")
    n_fine = phi * num_models
    if n_fine > num_features:
        raise InvalidConfigurationError(
            f"phi*T = {n_fine} exceeds feature count {num_features}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(num_features) + 1
    base, extra = divmod(num_features, n_fine)
    fine = []
    pos = 0
    for l in range(n_fine):
        size = base + (1 if l < extra else 0)
        fine.append(frozenset(int(j) for j in order[pos : pos + size]))
        pos += size
    offsets = tuple(
        sorted(int(v) + 1 for v in rng.choice(n_fine, size=phi, replace=False))
    )
    smap = SpreadMap(
        phi=phi,
        num_models=num_models,
        offsets=offsets,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM,
    )
    part = FeaturePartition(
        num_features,
        tuple(fine),
        KIND_OVERLAPPING,
        spread=smap,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM,
    )
    part.validate()
    return part, smap


def _check_counts(num_features: int, num_models: int) -> None:
    if num_models < 1:
        raise InvalidConfigurationError("submodel count must be >= 1")
    if num_models > num_features:
        raise InvalidConfigurationError(
            f"submodel count {num_models} exceeds feature count {num_features}"
        )


# On-disk schema: all index-like values are 0-based, unlike the in-memory
# representation.  {"schema_version", "d", "T", "kind", "phi", "seed",
# "rng_algorithm", "subsets": [[int]], "spread_offsets": [int]}

def partition_to_dict(part: FeaturePartition) -> dict:
    doc = {
        "schema_version": PARTITION_SCHEMA_VERSION,
        "d": part.num_features,
        "T": part.spread.num_models if part.spread else len(part.subsets),
        "kind": part.kind,
        "phi": part.spread.phi if part.spread else None,
        "seed": part.seed,
        "rng_algorithm": part.rng_algorithm,
        "subsets": [sorted(j - 1 for j in s) for s in part.subsets],
    }
    if part.spread is not None:
        doc["spread_offsets"] = [tau - 1 for tau in part.spread.offsets]
    return doc


def partition_from_dict(doc: dict) -> FeaturePartition:
    subsets = tuple(frozenset(j + 1 for j in s) for s in doc["subsets"])
    spread = None
    if doc.get("kind") == KIND_OVERLAPPING:
        spread = SpreadMap(
            phi=int(doc["phi"]),
            num_models=int(doc["T"]),
            offsets=tuple(tau + 1 for tau in doc["spread_offsets"]),
            seed=doc.get("seed"),
            rng_algorithm=doc.get("rng_algorithm"),
        )
    part = FeaturePartition(
        num_features=int(doc["d"]),
        subsets=subsets,
        kind=doc["kind"],
        spread=spread,
        seed=doc.get("seed"),
        rng_algorithm=doc.get("rng_algorithm"),
    )
    part.validate()
    return part


def save_partition(part: FeaturePartition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(partition_to_dict(part), fh, indent=2)
        fh.write("\n")


def load_partition(path) -> FeaturePartition:
    with open(path, encoding="utf-8") as fh:
        return partition_from_dict(json.load(fh))
