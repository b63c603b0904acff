"""Command-line interface.

Subcommands: ``partition``, ``train``, ``certify``, ``evaluate``,
``oracle-check``, ``envelope``.  Exit codes: 0 ok, 2 data error, 3 invalid
configuration, 4 capacity exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import certify as cert
from . import ensemble as ens
from . import harness
from . import oracle as orc
from . import regression as reg
from .errors import InvalidConfigurationError, SplitVoteError
from .learners import SubmodelSpec
from .overlap import OverlapProfile, certify_overlap
from .partition import (
    load_partition,
    overlapping_partition,
    random_partition,
    save_partition,
    spread_assignment,
    strided_partition,
)
from .plots import save_certified_accuracy_plot


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SplitVoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitvote",
        description="Train feature-partitioned voting ensembles and certify "
        "their predictions against sparse training/test perturbations.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("partition", help="write a feature partition file")
    p.add_argument("--features", type=int, required=True, help="feature count d")
    p.add_argument("--models", type=int, required=True, help="submodel count T")
    p.add_argument(
        "--strategy", choices=("strided", "random", "overlap"), default="strided"
    )
    p.add_argument("--phi", type=int, default=2, help="spread degree (overlap only)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_partition)

    p = sub.add_parser("train", help="train an ensemble bundle from a CSV")
    _add_data_args(p)
    p.add_argument("--partition-file", default=None, help="reuse a partition file")
    p.add_argument(
        "--strategy", choices=("strided", "random", "overlap"), default="strided"
    )
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--phi", type=int, default=2)
    p.add_argument(
        "--learner", choices=sorted(harness.LEARNER_FAMILIES), default="logistic"
    )
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--mode", choices=("feature", "instance"), default="feature")
    p.add_argument(
        "--instance-hash", choices=(ens.HASH_BLAKE2, ens.HASH_MODULO),
        default=ens.HASH_BLAKE2,
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("certify", help="certify instances with a trained bundle")
    _add_data_args(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--decision", choices=("plurality", "runoff"), default="plurality")
    p.add_argument("--topk", default="", help="comma-separated k values")
    p.add_argument("--interval-kind", choices=("absolute", "relative"), default="absolute")
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--out", required=True, help="JSON-lines output path")
    p.set_defaults(handler=_cmd_certify)

    p = sub.add_parser("evaluate", help="full train/certify/metrics pipeline")
    p.add_argument("--config", default=None, help="key = value config file")
    _add_data_args(p, required=False)
    p.add_argument(
        "--strategy", choices=("strided", "random", "overlap"), default=None
    )
    p.add_argument("--models", type=int, default=None)
    p.add_argument("--phi", type=int, default=None)
    p.add_argument("--learner", choices=sorted(harness.LEARNER_FAMILIES), default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--mode", choices=("feature", "instance"), default=None)
    p.add_argument("--decision", choices=("plurality", "runoff"), default=None)
    p.add_argument("--topk", default=None)
    p.add_argument("--interval-kind", choices=("absolute", "relative"), default=None)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--psi-max", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser(
        "oracle-check",
        help="compare certified radii against the exhaustive adversary",
    )
    p.add_argument(
        "--method",
        choices=("plurality", "runoff", "topk", "overlap"),
        default="plurality",
    )
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--labels", type=int, default=3)
    p.add_argument("--k", type=int, default=1, help="top-k target size")
    p.add_argument("--phi", type=int, default=2)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument(
        "--exhaustive",
        action="store_true",
        help="sweep all count vectors instead of sampling (plurality/topk)",
    )
    p.add_argument("--max-models", type=int, default=orc.DEFAULT_MAX_MODELS)
    p.add_argument("--max-labels", type=int, default=orc.DEFAULT_MAX_LABELS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="CSV report path")
    p.set_defaults(handler=_cmd_oracle_check)

    p = sub.add_parser("envelope", help="pointwise best certified accuracy")
    p.add_argument("--curves", nargs="+", required=True, help="curve CSV files")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_envelope)

    return parser


def _add_data_args(parser, required: bool = True) -> None:
    parser.add_argument("--data", required=required, help="CSV dataset path")
    parser.add_argument("--label-column", required=required)
    parser.add_argument(
        "--task", choices=("classification", "regression"), default="classification"
    )
    parser.add_argument("--delimiter", default=",")


def _require_seed(seed, why: str) -> int:
    if seed is None:
        raise InvalidConfigurationError(f"--seed is required for {why}")
    return seed


def _cmd_partition(args) -> int:
    if args.strategy == "strided":
        part = strided_partition(args.features, args.models)
    elif args.strategy == "random":
        seed = _require_seed(args.seed, "random partitioning")
        part = random_partition(args.features, args.models, seed)
    else:
        seed = _require_seed(args.seed, "overlapping partitioning")
        part, _ = overlapping_partition(args.features, args.models, args.phi, seed)
    save_partition(part, args.out)
    print(f"wrote {args.out} ({part.kind}, {part.ensemble_size} submodels)")
    return 0


def _load_dataset(args) -> harness.Dataset:
    schema = harness.DataSchema(args.label_column, args.task, args.delimiter)
    return harness.load_csv(args.data, schema)


def _cmd_train(args) -> int:
    data = _load_dataset(args)
    if args.partition_file:
        part = load_partition(args.partition_file)
    elif args.strategy == "strided":
        part = strided_partition(data.d, args.models)
    elif args.strategy == "random":
        part = random_partition(data.d, args.models, _require_seed(args.seed, "random partitioning"))
    else:
        part, _ = overlapping_partition(
            data.d, args.models, args.phi,
            _require_seed(args.seed, "overlapping partitioning"),
        )
    seed = args.seed
    if args.mode == "instance":
        seed = _require_seed(seed, "instance-partitioned training")
    spec = SubmodelSpec(
        family=harness.LEARNER_FAMILIES[args.learner],
        learning_rate=args.learning_rate,
        iterations=args.iterations,
        ridge=args.ridge,
        seed=seed or 0,
    )
    if args.task == "regression":
        model = ens.train_ensemble(
            data.features, data.targets(), part, spec,
            mode=ens.MODE_REGRESSION, seed=seed or 0,
        )
        side = {"task": "regression", "label_column": args.label_column}
    else:
        mode = ens.MODE_INSTANCE if args.mode == "instance" else ens.MODE_FEATURE
        model = ens.train_ensemble(
            data.features, data.class_indices(), part, spec,
            mode=mode, seed=seed or 0,
            num_labels=len(data.label_values),
            instance_hash=args.instance_hash,
        )
        side = {
            "task": "classification",
            "label_column": args.label_column,
            "label_values": list(data.label_values),
        }
    out_dir = Path(args.out_dir)
    ens.save_ensemble(model, out_dir)
    with open(out_dir / "dataset.json", "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=2)
        fh.write("\n")
    print(f"wrote bundle {out_dir} ({model.num_models} submodels, mode {model.mode})")
    return 0


def _cmd_certify(args) -> int:
    bundle = Path(args.bundle)
    model = ens.load_ensemble(bundle)
    with open(bundle / "dataset.json", encoding="utf-8") as fh:
        side = json.load(fh)
    data = _load_dataset(args)
    records = []
    if model.mode == ens.MODE_REGRESSION:
        targets = data.targets()
        for i in range(data.n):
            votes = ens.regression_votes(model, data.features[i])
            spec = reg.IntervalSpec.from_rule(
                float(targets[i]), args.interval_kind, args.xi
            )
            certificate = reg.certify_interval(votes, spec)
            ok = certificate.radius != harness.NEG_INF
            records.append(
                harness.CertificateRecord(
                    instance_id=i,
                    label=certificate.value,
                    radius=int(certificate.radius) if ok else None,
                    guarantee=certificate.guarantee,
                    method=certificate.method,
                    correct=ok,
                )
            )
    else:
        label_values = side["label_values"]
        lookup = {str(v): idx for idx, v in enumerate(label_values)}
        table = cert.DpTable(model.num_models)
        topk = tuple(int(v) for v in args.topk.split(",") if v.strip())
        for i in range(data.n):
            x = data.features[i]
            votes = ens.vote_profile(model, x)
            if args.decision == "runoff":
                certificate = cert.certify_runoff(
                    votes, ens.logit_profile(model, x), table
                )
            else:
                certificate = cert.certify_plurality(votes)
            if model.mode == ens.MODE_INSTANCE:
                certificate = cert.tag_label_flip(certificate, model.mode)
            truth = lookup.get(str(data.raw_labels[i]))
            records.append(
                harness.CertificateRecord(
                    instance_id=i,
                    label=label_values[certificate.label],
                    radius=int(certificate.radius),
                    guarantee=certificate.guarantee,
                    method=certificate.method,
                    correct=bool(truth == certificate.label),
                )
            )
            for k in topk:
                if truth is None or not 1 <= k < min(model.num_models, model.num_labels):
                    continue
                radius = cert.certify_topk(votes, truth, k)
                records.append(
                    harness.CertificateRecord(
                        instance_id=i,
                        label=label_values[truth],
                        radius=radius,
                        guarantee=certificate.guarantee,
                        method=cert.topk_method(k),
                        correct=radius >= 0,
                    )
                )
    harness.write_records_jsonl(records, args.out)
    print(f"wrote {len(records)} certificate records to {args.out}")
    return 0


_CONFIG_CLI_KEYS = (
    "dataset", "label_column", "task", "delimiter", "strategy", "models", "phi",
    "learner", "learning_rate", "iterations", "ridge", "mode", "decision",
    "topk", "interval_kind", "xi", "test_fraction", "psi_max", "seed",
)


def _cmd_evaluate(args) -> int:
    mapping: dict = {}
    if args.config:
        config_file = harness.ExperimentConfig.from_file(args.config)
        mapping = {
            f.name: getattr(config_file, f.name)
            for f in dataclass_fields(harness.ExperimentConfig)
        }
    overrides = {
        "dataset": args.data,
        "label_column": args.label_column,
        "task": args.task if (args.data or not mapping) else None,
        "delimiter": args.delimiter if args.delimiter != "," else None,
        "strategy": args.strategy,
        "models": args.models,
        "phi": args.phi,
        "learner": args.learner,
        "learning_rate": args.learning_rate,
        "iterations": args.iterations,
        "ridge": args.ridge,
        "mode": {"feature": ens.MODE_FEATURE, "instance": ens.MODE_INSTANCE}.get(args.mode),
        "decision": args.decision,
        "topk": args.topk,
        "interval_kind": args.interval_kind,
        "xi": args.xi,
        "test_fraction": args.test_fraction,
        "psi_max": args.psi_max,
        "seed": args.seed,
    }
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    if mapping.get("seed") is None:
        raise InvalidConfigurationError("--seed is required for evaluation")
    config = harness.ExperimentConfig.from_mapping(mapping)
    report = harness.run_experiment(config)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    harness.write_records_jsonl(report.records, out_dir / "records.jsonl")
    harness.write_summary(report, out_dir / "summary.json")
    curve = report.curve()
    harness.write_curve_csv(curve, out_dir / "curve.csv")
    save_certified_accuracy_plot(
        {report.primary_method: curve},
        out_dir / "curve.png",
        title="certified accuracy",
    )
    metrics = report.metrics()[report.primary_method]
    print(f"wrote report to {out_dir}")
    print(f"classification accuracy: {metrics['classification_accuracy']:.4f}")
    print(f"median certified robustness: {metrics['median_certified_robustness']}")
    return 0


def _profile_hash(*parts) -> str:
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return digest.hexdigest()


def _cmd_oracle_check(args) -> int:
    rows = []
    caps = orc.OracleCaps(max_models=args.max_models, max_labels=args.max_labels)
    if args.method in ("plurality", "topk") and args.exhaustive:
        profiles = [
            ens.VoteProfile.from_counts(counts)
            for counts in orc.enumerate_count_vectors(args.models, args.labels)
        ]
    else:
        seed = _require_seed(args.seed, "sampled oracle sweeps")
        rng = np.random.default_rng(seed)
        profiles = None

    if args.method == "plurality":
        if profiles is None:
            profiles = [
                orc.random_vote_profile(rng, args.models, args.labels)
                for _ in range(args.trials)
            ]
        for votes in profiles:
            certified = cert.certify_plurality(votes).radius
            stable = orc.max_stable_plurality(votes, caps)
            rows.append((_profile_hash(votes.counts), "plurality", certified, stable))
    elif args.method == "topk":
        if profiles is None:
            profiles = [
                orc.random_vote_profile(rng, args.models, args.labels)
                for _ in range(args.trials)
            ]
        for votes in profiles:
            for y in range(args.labels):
                certified = cert.certify_topk(votes, y, args.k)
                stable = orc.max_stable_topk(votes, y, args.k, caps)
                rows.append(
                    (
                        _profile_hash(votes.counts, y, args.k),
                        f"topk({args.k})",
                        certified,
                        stable,
                    )
                )
    elif args.method == "runoff":
        table = cert.DpTable(args.models)
        for _ in range(args.trials):
            votes, logits = orc.random_logit_profile(rng, args.models, args.labels)
            certified = cert.certify_runoff(votes, logits, table).radius
            stable = orc.max_stable_runoff(votes, logits, caps)
            rows.append(
                (
                    _profile_hash(votes.votes, logits.logits.tobytes()),
                    "runoff",
                    certified,
                    stable,
                )
            )
    else:
        n_subs = args.phi * args.models
        for trial in range(args.trials):
            spread = spread_assignment(args.models, args.phi, int(rng.integers(2**31)))
            votes = tuple(int(v) for v in rng.integers(0, args.labels, size=n_subs))
            profile = OverlapProfile.from_votes(votes, spread, args.labels)
            certified = certify_overlap(profile, args.phi).radius
            stable = orc.max_stable_overlap(votes, spread, args.labels, caps)
            rows.append(
                (
                    _profile_hash(votes, spread.offsets),
                    f"overlap({args.phi})",
                    certified,
                    stable,
                )
            )

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["profile_hash", "method", "certified_r", "oracle_r", "equal"])
        for profile_hash, method, certified, stable in rows:
            writer.writerow([profile_hash, method, certified, stable, certified == stable])
    violations = sum(1 for _, _, c, s in rows if c > s)
    equal = sum(1 for _, _, c, s in rows if c == s)
    print(f"wrote {len(rows)} rows to {args.out}")
    print(f"violations (certified > oracle): {violations}")
    print(f"equality rate: {equal / len(rows):.4f}")
    return 1 if violations else 0


def _cmd_envelope(args) -> int:
    curves = [harness.read_curve_csv(path) for path in args.curves]
    combined = harness.envelope(curves)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    harness.write_curve_csv(combined, out_dir / "envelope.csv")
    named = {Path(p).stem: c for p, c in zip(args.curves, curves)}
    named["envelope"] = combined
    save_certified_accuracy_plot(
        named, out_dir / "envelope.png", title="certified accuracy envelope"
    )
    print(f"wrote envelope to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
