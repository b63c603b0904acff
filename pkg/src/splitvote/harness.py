"""Dataset ingestion, experiment configuration, metrics, and report assembly.

The evaluation pipeline is deterministic end to end: the seed fixes the
train/test split, the partition draw, and (for instance-partitioned
training) the row assignment, so rerunning a configuration reproduces the
report byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import certify as cert
from . import ensemble as ens
from . import regression as reg
from .errors import DataError, InvalidArgumentError, InvalidConfigurationError
from .learners import (
    FAMILY_CENTROID,
    FAMILY_LEAST_SQUARES,
    FAMILY_LOGISTIC,
    SubmodelSpec,
)
from .partition import (
    FeaturePartition,
    overlapping_partition,
    random_partition,
    strided_partition,
)

TASK_CLASSIFICATION = "classification"
TASK_REGRESSION = "regression"

STRATEGY_STRIDED = "strided"
STRATEGY_RANDOM = "random"
STRATEGY_OVERLAP = "overlap"

DECISION_PLURALITY = "plurality"
DECISION_RUNOFF = "runoff"

LEARNER_FAMILIES = {
    "logistic": FAMILY_LOGISTIC,
    "centroid": FAMILY_CENTROID,
    "least-squares": FAMILY_LEAST_SQUARES,
}

NEG_INF = float("-inf")


@dataclass(frozen=True)
class DataSchema:
    label_column: str
    task: str = TASK_CLASSIFICATION
    delimiter: str = ","


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    raw_labels: tuple
    task: str
    feature_names: tuple[str, ...]
    label_values: tuple = ()  # sorted class values; index = class index

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def class_indices(self) -> np.ndarray:
        lookup = {v: i for i, v in enumerate(self.label_values)}
        return np.array([lookup[v] for v in self.raw_labels], dtype=np.int64)

    def targets(self) -> np.ndarray:
        return np.array([float(v) for v in self.raw_labels], dtype=np.float64)


def load_csv(path, schema: DataSchema) -> Dataset:
    """Read a headered CSV of numeric features plus one label/target column.

    Rejects ragged rows, non-numeric features, and non-finite values, always
    reporting the offending (row, column); rows are counted from 1 at the
    first data row.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if schema.label_column not in header:
            raise DataError(f"{path}: missing column {schema.label_column!r}")
        label_pos = header.index(schema.label_column)
        feature_names = tuple(
            name for i, name in enumerate(header) if i != label_pos
        )
        rows = []
        labels = []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_num} has {len(row)} fields, expected {len(header)}"
                )
            values = []
            for i, cell in enumerate(row):
                if i == label_pos:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric feature at row {row_num}, "
                        f"column {header[i]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: non-finite feature at row {row_num}, "
                        f"column {header[i]!r}"
                    )
                values.append(v)
            labels.append(row[label_pos])
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    features = np.array(rows, dtype=np.float64)

    if schema.task == TASK_REGRESSION:
        try:
            targets = [float(v) for v in labels]
        except ValueError:
            raise DataError(f"{path}: non-numeric regression target") from None
        if not all(math.isfinite(v) for v in targets):
            raise DataError(f"{path}: non-finite regression target")
        return Dataset(features, tuple(targets), schema.task, feature_names)

    label_values = tuple(sorted(set(labels), key=_class_sort_key))
    return Dataset(features, tuple(labels), schema.task, feature_names, label_values)


def _class_sort_key(value):
    try:
        return (0, float(value), str(value))
    except ValueError:
        return (1, 0.0, str(value))


def save_csv(path, features: np.ndarray, labels, label_column: str = "label") -> None:
    features = np.asarray(features)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(features.shape[1])] + [label_column])
        for row, label in zip(features, labels):
            writer.writerow([repr(float(v)) for v in row] + [label])


def train_test_split_indices(
    n: int, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < test_fraction < 1:
        raise InvalidConfigurationError("test fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    if n_test >= n:
        raise InvalidConfigurationError("split leaves no training rows")
    return np.sort(order[n_test:]), np.sort(order[:n_test])


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def median_certified_robustness(radii) -> float:
    """Median radius with -inf entries allowed; even sizes take the lower middle."""
    values = sorted(radii)
    if not values:
        raise InvalidArgumentError("median of an empty radius multiset")
    return values[(len(values) - 1) // 2]


@dataclass(frozen=True)
class CertificateRecord:
    instance_id: int
    label: object
    radius: int | None  # None encodes the -inf sentinel
    guarantee: str
    method: str
    correct: bool

    def metric_radius(self) -> float:
        if not self.correct or self.radius is None:
            return NEG_INF
        return self.radius

    def to_json_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "label": self.label,
            "radius": self.radius,
            "guarantee": self.guarantee,
            "method": self.method,
            "correct": self.correct,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CertificateRecord":
        return cls(
            instance_id=doc["instance_id"],
            label=doc["label"],
            radius=doc["radius"],
            guarantee=doc["guarantee"],
            method=doc["method"],
            correct=doc["correct"],
        )


def certified_accuracy(records, psi: int) -> float:
    """Fraction of instances that are correct and certified to radius >= psi."""
    if psi < 0:
        raise InvalidArgumentError("psi must be >= 0")
    records = list(records)
    if not records:
        raise InvalidArgumentError("no records")
    hits = sum(1 for r in records if r.correct and r.metric_radius() >= psi)
    return hits / len(records)


def compute_metrics(records, psi_grid) -> dict:
    records = list(records)
    accuracy = sum(1 for r in records if r.correct) / len(records)
    return {
        "classification_accuracy": accuracy,
        "median_certified_robustness": median_certified_robustness(
            r.metric_radius() for r in records
        ),
        "certified_accuracy": {
            int(psi): certified_accuracy(records, psi) for psi in psi_grid
        },
    }


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    dataset: str
    label_column: str
    seed: int
    task: str = TASK_CLASSIFICATION
    delimiter: str = ","
    strategy: str = STRATEGY_STRIDED
    models: int = 5
    phi: int = 1
    learner: str = "logistic"
    learning_rate: float = 0.1
    iterations: int = 500
    ridge: float = 0.0
    mode: str = ens.MODE_FEATURE
    decision: str = DECISION_PLURALITY
    topk: tuple[int, ...] = ()
    interval_kind: str = reg.RULE_ABSOLUTE
    xi: float = 1.0
    test_fraction: float = 0.25
    psi_max: int | None = None
    instance_hash: str = ens.HASH_BLAKE2

    def validate(self) -> None:
        if self.task not in (TASK_CLASSIFICATION, TASK_REGRESSION):
            raise InvalidConfigurationError(f"unknown task {self.task!r}")
        if self.strategy not in (STRATEGY_STRIDED, STRATEGY_RANDOM, STRATEGY_OVERLAP):
            raise InvalidConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.learner not in LEARNER_FAMILIES:
            raise InvalidConfigurationError(f"unknown learner {self.learner!r}")
        if self.decision not in (DECISION_PLURALITY, DECISION_RUNOFF):
            raise InvalidConfigurationError(f"unknown decision {self.decision!r}")
        if self.task == TASK_REGRESSION:
            if self.models % 2 == 0:
                raise InvalidConfigurationError("regression requires an odd model count")
            if self.decision != DECISION_PLURALITY:
                raise InvalidConfigurationError(
                    "regression uses the binary reduction; only plurality applies"
                )
            if self.interval_kind not in (reg.RULE_ABSOLUTE, reg.RULE_RELATIVE):
                raise InvalidConfigurationError(
                    f"unknown interval rule {self.interval_kind!r}"
                )
        if self.mode not in (ens.MODE_FEATURE, ens.MODE_INSTANCE):
            raise InvalidConfigurationError(f"unknown training mode {self.mode!r}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(mapping) - known
        if unknown:
            raise InvalidConfigurationError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        for required in ("dataset", "label_column", "seed"):
            if required not in mapping:
                raise InvalidConfigurationError(f"missing config key {required!r}")
        coerced = dict(mapping)
        for key in ("seed", "models", "phi", "iterations", "psi_max"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = int(coerced[key])
        for key in ("learning_rate", "ridge", "xi", "test_fraction"):
            if key in coerced:
                coerced[key] = float(coerced[key])
        if "topk" in coerced and not isinstance(coerced["topk"], tuple):
            raw = str(coerced["topk"]).strip()
            coerced["topk"] = (
                tuple(int(v) for v in raw.split(",") if v.strip()) if raw else ()
            )
        config = cls(**coerced)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse a ``key = value`` config file; '#' starts a comment."""
        mapping: dict = {}
        with open(path, encoding="utf-8") as fh:
            for line_num, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise InvalidConfigurationError(
                        f"{path}: line {line_num} is not 'key = value'"
                    )
                key, value = text.split("=", 1)
                mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping)


def build_partition(config: ExperimentConfig, num_features: int) -> FeaturePartition:
    if config.strategy == STRATEGY_STRIDED:
        return strided_partition(num_features, config.models)
    if config.strategy == STRATEGY_RANDOM:
        return random_partition(num_features, config.models, config.seed)
    part, _ = overlapping_partition(
        num_features, config.models, config.phi, config.seed
    )
    return part


# ---------------------------------------------------------------------------
# Experiment execution
# ---------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    records: list[CertificateRecord]
    num_models: int
    psi_grid: tuple[int, ...]
    primary_method: str
    config: dict = field(default_factory=dict)

    def methods(self) -> tuple[str, ...]:
        seen = []
        for r in self.records:
            if r.method not in seen:
                seen.append(r.method)
        return tuple(seen)

    def metrics(self) -> dict:
        return {
            method: compute_metrics(
                [r for r in self.records if r.method == method], self.psi_grid
            )
            for method in self.methods()
        }

    def curve(self, method: str | None = None) -> list[tuple[int, float]]:
        method = method or self.primary_method
        rows = [r for r in self.records if r.method == method]
        return [(int(psi), certified_accuracy(rows, psi)) for psi in self.psi_grid]

    def summary_dict(self) -> dict:
        return {
            "config": self.config,
            "num_models": self.num_models,
            "psi_grid": list(self.psi_grid),
            "primary_method": self.primary_method,
            "num_records": len(self.records),
            "metrics": _jsonify(self.metrics()),
        }


def _jsonify(value):
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, float) and value == NEG_INF:
        return "-inf"
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def run_experiment(config: ExperimentConfig) -> EvaluationReport:
    config.validate()
    schema = DataSchema(config.label_column, config.task, config.delimiter)
    data = load_csv(config.dataset, schema)
    train_idx, test_idx = train_test_split_indices(
        data.n, config.test_fraction, config.seed
    )
    part = build_partition(config, data.d)
    spec = SubmodelSpec(
        family=LEARNER_FAMILIES[config.learner],
        learning_rate=config.learning_rate,
        iterations=config.iterations,
        ridge=config.ridge,
        seed=config.seed,
    )

    if config.task == TASK_REGRESSION:
        targets = data.targets()
        model = ens.train_ensemble(
            data.features[train_idx],
            targets[train_idx],
            part,
            spec,
            mode=ens.MODE_REGRESSION,
            seed=config.seed,
        )
        records = _certify_regression(
            model, data.features[test_idx], targets[test_idx], config
        )
        num_models = model.num_models
    else:
        y_idx = data.class_indices()
        num_labels = len(data.label_values)
        model = ens.train_ensemble(
            data.features[train_idx],
            y_idx[train_idx],
            part,
            spec,
            mode=config.mode,
            seed=config.seed,
            num_labels=num_labels,
            instance_hash=config.instance_hash,
        )
        records = _certify_classification(
            model, data, data.features[test_idx], y_idx[test_idx], config
        )
        num_models = model.num_models

    psi_max = config.psi_max if config.psi_max is not None else num_models
    psi_grid = tuple(range(psi_max + 1))
    primary = (
        reg.METHOD_INTERVAL
        if config.task == TASK_REGRESSION
        else (
            cert.METHOD_RUNOFF
            if config.decision == DECISION_RUNOFF
            else cert.METHOD_PLURALITY
        )
    )
    return EvaluationReport(
        records=records,
        num_models=num_models,
        psi_grid=psi_grid,
        primary_method=primary,
        config=_jsonify(asdict(config)),
    )


def _certify_classification(model, data, features, true_idx, config):
    records = []
    table = cert.DpTable(model.num_models)
    num_labels = model.num_labels
    valid_topk = tuple(
        k for k in config.topk if 1 <= k < min(model.num_models, num_labels)
    )
    for i, (x, truth) in enumerate(zip(features, true_idx)):
        votes = ens.vote_profile(model, x)
        if config.decision == DECISION_RUNOFF:
            logits = ens.logit_profile(model, x)
            certificate = cert.certify_runoff(votes, logits, table)
        else:
            certificate = cert.certify_plurality(votes)
        if model.mode == ens.MODE_INSTANCE:
            certificate = cert.tag_label_flip(certificate, model.mode)
        records.append(
            CertificateRecord(
                instance_id=i,
                label=data.label_values[certificate.label],
                radius=int(certificate.radius),
                guarantee=certificate.guarantee,
                method=certificate.method,
                correct=bool(certificate.label == truth),
            )
        )
        topk_guarantee = (
            cert.GUARANTEE_FEATURE_LABEL_FLIP
            if model.mode == ens.MODE_INSTANCE
            else cert.GUARANTEE_FEATURE
        )
        for k in valid_topk:
            radius = cert.certify_topk(votes, int(truth), k)
            records.append(
                CertificateRecord(
                    instance_id=i,
                    label=data.label_values[int(truth)],
                    radius=radius,
                    guarantee=topk_guarantee,
                    method=cert.topk_method(k),
                    correct=radius >= 0,
                )
            )
    return records


def _certify_regression(model, features, targets, config):
    records = []
    for i, (x, truth) in enumerate(zip(features, targets)):
        votes = ens.regression_votes(model, x)
        spec = reg.IntervalSpec.from_rule(float(truth), config.interval_kind, config.xi)
        certificate = reg.certify_interval(votes, spec)
        satisfied = certificate.radius != NEG_INF
        records.append(
            CertificateRecord(
                instance_id=i,
                label=certificate.value,
                radius=int(certificate.radius) if satisfied else None,
                guarantee=certificate.guarantee,
                method=certificate.method,
                correct=satisfied,
            )
        )
    return records


# ---------------------------------------------------------------------------
# Report and envelope output
# ---------------------------------------------------------------------------


def write_records_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict()))
            fh.write("\n")


def read_records_jsonl(path) -> list[CertificateRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(CertificateRecord.from_json_dict(json.loads(line)))
    return out


def write_summary(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.summary_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_curve_csv(curve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["psi", "certified_accuracy"])
        for psi, acc in curve:
            writer.writerow([psi, repr(float(acc))])


def read_curve_csv(path) -> list[tuple[int, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(int(row[0]), float(row[1])) for row in reader]


def envelope(curves) -> list[tuple[int, float]]:
    """Pointwise maximum of certified-accuracy curves over a shared psi range."""
    curves = [dict(curve) for curve in curves]
    if not curves:
        raise InvalidArgumentError("no curves to combine")
    psis = sorted({psi for curve in curves for psi in curve})
    return [(psi, max(curve.get(psi, 0.0) for curve in curves)) for psi in psis]
