"""Acceptance suite: one criterion per test, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines and logged rates.
"""

import itertools
import time

import numpy as np
import pytest

from synthdata import gaussian_blobs

from splitvote import certify as c
from splitvote import ensemble as ens
from splitvote import harness as h
from splitvote import oracle as o
from splitvote import regression as reg
from splitvote.learners import FAMILY_LOGISTIC, SubmodelSpec
from splitvote.overlap import OverlapProfile, certify_overlap
from splitvote.partition import spread_assignment, strided_partition

NEG_INF = float("-inf")


def _report(num: int, description: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\n[criterion {num}] {status}: {description}{detail}")
    assert passed, f"criterion {num} failed: {description}{detail}"


def test_criterion_1_plurality_tightness():
    started = time.time()
    mismatches = 0
    checked = 0
    for num_labels in (2, 3, 4):
        for num_models in range(1, 8):
            for counts in o.enumerate_count_vectors(num_models, num_labels):
                votes = ens.VoteProfile.from_counts(counts)
                if c.certify_plurality(votes).radius != o.max_stable_plurality(votes):
                    mismatches += 1
                checked += 1
    elapsed = time.time() - started
    _report(
        1,
        "plurality radius equals the exhaustive adversary exactly "
        f"(T<=7, labels<=4; {checked} profiles, {elapsed:.1f}s)",
        mismatches == 0 and elapsed < 120.0,
        f"; mismatches={mismatches}",
    )


def test_criterion_2_runoff_soundness():
    rng = np.random.default_rng(20240801)
    trials = 10_000
    violations = 0
    equal = 0
    tables = {t: c.DpTable(t) for t in range(1, 6)}
    for _ in range(trials):
        num_models = int(rng.integers(1, 6))
        num_labels = int(rng.integers(2, 4))
        votes, logits = o.random_logit_profile(rng, num_models, num_labels)
        radius = c.certify_runoff(votes, logits, tables[num_models]).radius
        stable = o.max_stable_runoff(votes, logits)
        if radius > stable:
            violations += 1
        if radius == stable:
            equal += 1
    _report(
        2,
        f"run-off radius never exceeds the exhaustive adversary on {trials} "
        f"random profiles (T<=5, labels<=3)",
        violations == 0,
        f"; violations={violations}, equality rate={equal / trials:.4f}",
    )


def test_criterion_3_binary_runoff_equals_plurality():
    rng = np.random.default_rng(7)
    trials = 10_000
    mismatches = 0
    tables = {t: c.DpTable(t) for t in range(1, 8)}
    for _ in range(trials):
        num_models = int(rng.integers(1, 8))
        votes, logits = o.random_logit_profile(rng, num_models, 2)
        ro = c.certify_runoff(votes, logits, tables[num_models])
        pl = c.certify_plurality(votes)
        if (ro.label, ro.radius) != (pl.label, pl.radius):
            mismatches += 1
    _report(
        3,
        f"binary run-off prediction and radius equal plurality on {trials} random profiles",
        mismatches == 0,
        f"; mismatches={mismatches}",
    )


def test_criterion_4_topk_optimality():
    started = time.time()
    mismatches = 0
    top1_mismatches = 0
    checked = 0
    for num_labels in (2, 3, 4):
        for num_models in range(2, 8):
            for counts in o.enumerate_count_vectors(num_models, num_labels):
                votes = ens.VoteProfile.from_counts(counts)
                leader = c.top_two(counts)[0]
                if c.certify_topk(votes, leader, 1) != c.certify_plurality(votes).radius:
                    top1_mismatches += 1
                for k in (1, 2, 3):
                    if k >= num_models or k >= num_labels:
                        continue
                    for y in range(num_labels):
                        if c.certify_topk(votes, y, k) != o.max_stable_topk(votes, y, k):
                            mismatches += 1
                        checked += 1
    elapsed = time.time() - started
    _report(
        4,
        "greedy top-k radius equals the exhaustive adversary exactly and "
        f"top-1 equals the plurality closed form ({checked} cases, {elapsed:.1f}s)",
        mismatches == 0 and top1_mismatches == 0,
        f"; oracle mismatches={mismatches}, top-1 mismatches={top1_mismatches}",
    )


def test_criterion_5_dp_table():
    table = c.DpTable(64)
    spot_ok = (
        c.dp(0, 0, table) == 0 and c.dp(1, 1, table) == 1 and c.dp(3, 3, table) == 2
    )
    symmetric = True
    monotone = True
    for a in range(-2, 65):
        for b in range(-2, 65):
            if table.lookup(a, b) != table.lookup(b, a):
                symmetric = False
            if a < 64 and table.lookup(a, b) > table.lookup(a + 1, b):
                monotone = False
    _report(
        5,
        "dp spot values (0,0)->0, (1,1)->1, (3,3)->2; table symmetric and "
        "monotone through gap 64",
        spot_ok and symmetric and monotone,
        f"; spot={spot_ok}, symmetric={symmetric}, monotone={monotone}",
    )


def test_criterion_6_overlap():
    mismatches = 0
    for num_labels in (2, 3):
        for num_models in range(1, 8):
            spread = spread_assignment(num_models, 1, seed=3)
            for counts in o.enumerate_count_vectors(num_models, num_labels):
                votes = ens.VoteProfile.from_counts(counts).votes
                profile = OverlapProfile.from_votes(votes, spread, num_labels)
                plain = c.certify_plurality(ens.VoteProfile(votes, num_labels)).radius
                if certify_overlap(profile, 1).radius != plain:
                    mismatches += 1

    rng = np.random.default_rng(99)
    trials = 1_000
    violations = 0
    equal = 0
    caps = o.OracleCaps(max_models=8, max_labels=3)
    for _ in range(trials):
        num_models = int(rng.integers(2, 5))  # phi*T <= 8
        num_labels = int(rng.integers(2, 4))
        spread = spread_assignment(num_models, 2, seed=int(rng.integers(2**31)))
        votes = tuple(int(v) for v in rng.integers(0, num_labels, size=spread.n_subsets))
        profile = OverlapProfile.from_votes(votes, spread, num_labels)
        radius = certify_overlap(profile, 2).radius
        stable = o.max_stable_overlap(votes, spread, num_labels, caps)
        if radius > stable:
            violations += 1
        if radius == stable:
            equal += 1
    _report(
        6,
        "spread-degree-1 radius equals plurality exactly (T<=7, labels<=3); "
        f"spread-degree-2 radius never exceeds the subset adversary on {trials} profiles",
        mismatches == 0 and violations == 0,
        f"; phi=1 mismatches={mismatches}, phi=2 violations={violations}, "
        f"phi=2 equality rate={equal / trials:.4f}",
    )


def _interval_breakable(votes, spec, budget):
    """Exhaustive submodel-output adversary; extremes dominate for medians."""
    t = len(votes)
    for positions in itertools.combinations(range(t), budget):
        for signs in itertools.product((-1e9, 1e9), repeat=budget):
            mutated = list(votes)
            for pos, val in zip(positions, signs):
                mutated[pos] = val
            med = sorted(mutated)[t // 2]
            if not spec.lower <= med <= spec.upper:
                return True
    return False


def test_criterion_7_regression_reduction():
    rng = np.random.default_rng(123)
    trials = 10_000
    reduction_mismatches = 0
    min_mismatches = 0
    oracle_breaks = 0
    for _ in range(trials):
        num_models = int(rng.integers(0, 5)) * 2 + 1
        votes = list(rng.normal(scale=5.0, size=num_models))
        threshold = float(rng.normal(scale=5.0))
        below = reg.median_decision(votes) <= threshold
        if below != (ens.predict_plurality(reg.binarize(votes, threshold)) == 0):
            reduction_mismatches += 1

        med = reg.median_decision(votes)
        spec = reg.IntervalSpec(
            med - float(rng.random()) - 0.05, med + float(rng.random()) + 0.05
        )
        cert = reg.certify_interval(votes, spec)
        sides = min(
            reg.certify_lower(votes, spec.lower), reg.certify_upper(votes, spec.upper)
        )
        if cert.radius != sides:
            min_mismatches += 1
        if _interval_breakable(votes, spec, int(cert.radius)):
            oracle_breaks += 1
    _report(
        7,
        f"median/threshold reduction exact, two-sided radius is the min of the "
        f"sides, and the vote-flip adversary confirms stability ({trials} trials)",
        reduction_mismatches == 0 and min_mismatches == 0 and oracle_breaks == 0,
        f"; reduction mismatches={reduction_mismatches}, "
        f"min mismatches={min_mismatches}, oracle breaks={oracle_breaks}",
    )


def test_criterion_8_end_to_end_mutation():
    started = time.time()
    X, y = gaussian_blobs(n_per_class=100, d=20, num_classes=3, seed=5)
    train_idx, test_idx = h.train_test_split_indices(X.shape[0], 0.2, seed=5)
    part = strided_partition(20, 5)
    spec = SubmodelSpec(FAMILY_LOGISTIC, learning_rate=0.3, iterations=200)

    def fit(features):
        return ens.train_ensemble(
            features[train_idx], y[train_idx], part, spec, num_labels=3
        )

    base_model = fit(X)
    base_votes = [ens.vote_profile(base_model, x) for x in X[test_idx]]
    base_preds = [ens.predict_plurality(v) for v in base_votes]
    base_radii = [c.certify_plurality(v).radius for v in base_votes]

    owner = {}
    for t in range(1, part.ensemble_size + 1):
        for col in part.columns(t):
            owner[int(col)] = t - 1

    rng = np.random.default_rng(11)
    multi_vote_changes = 0
    wrong_submodel_changes = 0
    broken_certificates = 0
    for dim in range(20):
        corrupted = X.copy()
        corrupted[:, dim] = rng.normal(loc=1000.0, scale=500.0, size=X.shape[0])
        mutated_model = fit(corrupted)
        for i, x in enumerate(corrupted[test_idx]):
            votes = ens.vote_profile(mutated_model, x)
            changed = [
                pos
                for pos, (a, b) in enumerate(zip(base_votes[i].votes, votes.votes))
                if a != b
            ]
            if len(changed) > 1:
                multi_vote_changes += 1
            if changed and changed[0] != owner[dim]:
                wrong_submodel_changes += 1
            if base_radii[i] >= 1 and ens.predict_plurality(votes) != base_preds[i]:
                broken_certificates += 1
    elapsed = time.time() - started
    _report(
        8,
        "rewriting any single feature dimension in train+test flips at most one "
        f"vote per instance and never breaks a radius>=1 certificate ({elapsed:.1f}s)",
        multi_vote_changes == 0
        and wrong_submodel_changes == 0
        and broken_certificates == 0
        and elapsed < 300.0,
        f"; multi-vote changes={multi_vote_changes}, "
        f"wrong-submodel changes={wrong_submodel_changes}, "
        f"broken certificates={broken_certificates}",
    )


def test_criterion_9_metric_conventions(tmp_path):
    median_ok = h.median_certified_robustness([NEG_INF, 0, 2]) == 0

    X, y = gaussian_blobs(n_per_class=30, d=10, num_classes=3, seed=8)
    path = tmp_path / "blobs.csv"
    h.save_csv(path, X, [f"c{v}" for v in y])
    antitone = True
    for decision in ("plurality", "runoff"):
        config = h.ExperimentConfig.from_mapping(
            {
                "dataset": str(path),
                "label_column": "label",
                "seed": 2,
                "models": 5,
                "iterations": 60,
                "learning_rate": 0.3,
                "decision": decision,
                "topk": "1,2",
            }
        )
        report = h.run_experiment(config)
        for method, metrics in report.metrics().items():
            curve = [metrics["certified_accuracy"][psi] for psi in report.psi_grid]
            if curve != sorted(curve, reverse=True):
                antitone = False
    _report(
        9,
        "median of [-inf, 0, 2] is 0 and certified accuracy is antitone in the "
        "threshold on every generated report",
        median_ok and antitone,
        f"; median_ok={median_ok}, antitone={antitone}",
    )
