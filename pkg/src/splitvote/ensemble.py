"""Ensembles of feature-restricted submodels and their vote/logit profiles.

Training modes:

* ``feature-partition``: every submodel sees all rows, restricted to its
  feature columns.
* ``instance-partition``: rows are additionally split across submodels by a
  deterministic hash of the row index, so a single training-label flip can
  touch at most one submodel.
* ``regression``: like feature-partition but with real-valued targets and a
  median decision; requires an odd submodel count.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidConfigurationError, TrainingError
from .learners import (
    FAMILY_LEAST_SQUARES,
    SubmodelSpec,
    TrainedSubmodel,
    load_submodel,
    save_submodel,
    train_submodel,
)
from .partition import FeaturePartition, partition_from_dict, partition_to_dict

MODE_FEATURE = "feature-partition"
MODE_INSTANCE = "instance-partition"
MODE_REGRESSION = "regression"

MODES = (MODE_FEATURE, MODE_INSTANCE, MODE_REGRESSION)

HASH_BLAKE2 = "blake2"
HASH_MODULO = "modulo"

BUNDLE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class VoteProfile:
    """Per-submodel predicted labels and the per-label tallies."""

    votes: tuple[int, ...]
    num_labels: int
    counts: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if any(not 0 <= v < self.num_labels for v in self.votes):
            raise DataError("vote outside 0..num_labels-1")
        tally = [0] * self.num_labels
        for v in self.votes:
            tally[v] += 1
        object.__setattr__(self, "counts", tuple(tally))

    @property
    def num_models(self) -> int:
        return len(self.votes)

    @classmethod
    def from_counts(cls, counts) -> "VoteProfile":
        """Expand a per-label count vector into a canonical vote sequence."""
        votes: list[int] = []
        for label, c in enumerate(counts):
            votes.extend([label] * int(c))
        return cls(tuple(votes), num_labels=len(counts))


@dataclass(frozen=True)
class LogitProfile:
    """Per-submodel logit rows (T x num_labels), all finite."""

    logits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.logits, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"logit profile must be 2-d, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("non-finite logits")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "logits", arr)

    @property
    def num_models(self) -> int:
        return self.logits.shape[0]

    @property
    def num_labels(self) -> int:
        return self.logits.shape[1]

    def votes(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.argmax(self.logits, axis=1))

    def logit_win_count(self, label: int, other: int) -> int:
        """Number of submodels ranking ``label`` strictly above ``other``."""
        return int(np.sum(self.logits[:, label] > self.logits[:, other]))


@dataclass(frozen=True)
class Ensemble:
    partition: FeaturePartition
    submodels: tuple[TrainedSubmodel, ...]
    mode: str
    num_labels: int | None
    seed: int | None = None
    spec: SubmodelSpec | None = None
    instance_hash: str = HASH_BLAKE2

    @property
    def num_models(self) -> int:
        return len(self.submodels)

    @property
    def num_features(self) -> int:
        return self.partition.num_features


def instance_assignment(
    num_rows: int, num_models: int, seed: int, kind: str = HASH_BLAKE2
) -> np.ndarray:
    """Deterministic row-to-submodel assignment (0-based submodel indices)."""
    if kind == HASH_MODULO:
        return np.arange(num_rows, dtype=np.int64) % num_models
    if kind != HASH_BLAKE2:
        raise InvalidConfigurationError(f"unknown instance hash kind {kind!r}")
    out = np.empty(num_rows, dtype=np.int64)
    for i in range(num_rows):
        digest = hashlib.blake2b(
            struct.pack("<qq", seed, i), digest_size=8
        ).digest()
        out[i] = int.from_bytes(digest, "little") % num_models
    return out


def train_ensemble(
    features: np.ndarray,
    targets: np.ndarray,
    part: FeaturePartition,
    spec: SubmodelSpec,
    mode: str = MODE_FEATURE,
    seed: int = 0,
    num_labels: int | None = None,
    instance_hash: str = HASH_BLAKE2,
) -> Ensemble:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DataError(f"feature matrix must be 2-d, got shape {features.shape}")
    if features.shape[1] != part.num_features:
        raise DataError(
            f"matrix has {features.shape[1]} columns, partition expects {part.num_features}"
        )
    if mode not in MODES:
        raise InvalidConfigurationError(f"unknown ensemble mode {mode!r}")

    n_models = part.ensemble_size
    if mode == MODE_REGRESSION:
        if spec.family != FAMILY_LEAST_SQUARES:
            raise InvalidConfigurationError(
                "regression mode requires the linear-least-squares family"
            )
        if n_models % 2 == 0:
            raise InvalidConfigurationError(
                "regression mode requires an odd submodel count"
            )
        num_labels = None
    else:
        if num_labels is None:
            num_labels = int(np.max(targets)) + 1
        if num_labels < 2:
            raise InvalidConfigurationError("classification requires num_labels >= 2")

    assignment = None
    if mode == MODE_INSTANCE:
        assignment = instance_assignment(
            features.shape[0], n_models, seed, instance_hash
        )

    targets = np.asarray(targets)
    submodels = []
    for t in range(1, n_models + 1):
        cols = part.columns(t)
        if assignment is None:
            block, y_block = features[:, cols], targets
        else:
            mask = assignment == (t - 1)
            block, y_block = features[mask][:, cols], targets[mask]
        if block.shape[0] == 0:
            raise TrainingError(f"submodel {t} received no training rows")
        subset = tuple(int(c) + 1 for c in cols)
        submodels.append(
            train_submodel(spec, block, y_block, subset, num_labels=num_labels)
        )
    return Ensemble(
        partition=part,
        submodels=tuple(submodels),
        mode=mode,
        num_labels=num_labels,
        seed=seed,
        spec=spec,
        instance_hash=instance_hash,
    )


def logit_profile(ensemble: Ensemble, x: np.ndarray) -> LogitProfile:
    x = _check_vector(ensemble, x)
    rows = [m.logits(x) for m in ensemble.submodels]
    return LogitProfile(np.vstack(rows))


def vote_profile(ensemble: Ensemble, x: np.ndarray) -> VoteProfile:
    x = _check_vector(ensemble, x)
    votes = tuple(m.predict_label(x) for m in ensemble.submodels)
    return VoteProfile(votes, num_labels=ensemble.num_labels)


def regression_votes(ensemble: Ensemble, x: np.ndarray) -> np.ndarray:
    if ensemble.mode != MODE_REGRESSION:
        raise InvalidConfigurationError("regression votes require regression mode")
    x = _check_vector(ensemble, x)
    return np.array([m.predict_value(x) for m in ensemble.submodels])


def _check_vector(ensemble: Ensemble, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ensemble.num_features,):
        raise DataError(
            f"expected a vector of length {ensemble.num_features}, got shape {x.shape}"
        )
    return x


def plurality_runner_up(counts) -> tuple[int, int]:
    """Top-two labels by vote count, ties broken toward the smaller index."""
    order = sorted(range(len(counts)), key=lambda y: (-counts[y], y))
    if len(order) < 2:
        raise InvalidConfigurationError("need at least two labels")
    return order[0], order[1]


def predict_plurality(profile: VoteProfile) -> int:
    order = sorted(range(profile.num_labels), key=lambda y: (-profile.counts[y], y))
    return order[0]


def predict_runoff(votes: VoteProfile, logits: LogitProfile) -> int:
    """Two-round decision: top-two by votes, then pairwise logit wins."""
    if votes.num_labels < 2:
        raise InvalidConfigurationError("run-off requires at least two labels")
    leader, runner_up = plurality_runner_up(votes.counts)
    gap = (
        logits.logit_win_count(leader, runner_up)
        - logits.logit_win_count(runner_up, leader)
        - (1 if runner_up < leader else 0)
    )
    return leader if gap >= 0 else runner_up


def save_ensemble(ensemble: Ensemble, bundle_dir) -> None:
    """Write a manifest plus one JSON parameter file per submodel."""
    bundle = Path(bundle_dir)
    bundle.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "mode": ensemble.mode,
        "num_labels": ensemble.num_labels,
        "seed": ensemble.seed,
        "instance_hash": ensemble.instance_hash,
        "partition": partition_to_dict(ensemble.partition),
        "spec": None
        if ensemble.spec is None
        else {
            "family": ensemble.spec.family,
            "learning_rate": ensemble.spec.learning_rate,
            "iterations": ensemble.spec.iterations,
            "ridge": ensemble.spec.ridge,
            "seed": ensemble.spec.seed,
        },
        "submodels": [f"submodel_{t:03d}.json" for t in range(len(ensemble.submodels))],
    }
    with open(bundle / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for name, model in zip(manifest["submodels"], ensemble.submodels):
        save_submodel(model, bundle / name)


def load_ensemble(bundle_dir) -> Ensemble:
    bundle = Path(bundle_dir)
    with open(bundle / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    part = partition_from_dict(manifest["partition"])
    spec = None
    if manifest.get("spec"):
        spec = SubmodelSpec(**manifest["spec"])
    submodels = tuple(load_submodel(bundle / name) for name in manifest["submodels"])
    return Ensemble(
        partition=part,
        submodels=submodels,
        mode=manifest["mode"],
        num_labels=manifest["num_labels"],
        seed=manifest.get("seed"),
        spec=spec,
        instance_hash=manifest.get("instance_hash", HASH_BLAKE2),
    )
