import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitvote import certify as c
from splitvote import oracle as o
from splitvote.ensemble import MODE_FEATURE, MODE_INSTANCE, LogitProfile, VoteProfile
from splitvote.errors import InvalidArgumentError, InvalidUpgradeError

counts_strategy = st.lists(
    st.integers(min_value=0, max_value=7), min_size=2, max_size=4
).filter(lambda cs: 1 <= sum(cs) <= 7)


class TestGapVote:
    def test_plain_margin(self):
        v = VoteProfile.from_counts((3, 2))
        assert c.gap_vote(v, 0, 1) == 1

    def test_indicator_fires_for_smaller_rival(self):
        v = VoteProfile.from_counts((2, 3))
        assert c.gap_vote(v, 1, 0) == 0

    def test_tie_is_asymmetric(self):
        v = VoteProfile.from_counts((3, 3))
        assert c.gap_vote(v, 0, 1) == 0
        assert c.gap_vote(v, 1, 0) == -1

    def test_same_label_rejected(self):
        v = VoteProfile.from_counts((3, 3))
        with pytest.raises(InvalidArgumentError):
            c.gap_vote(v, 1, 1)

    @settings(max_examples=80, deadline=None)
    @given(counts=counts_strategy)
    def test_gap_pair_sums_to_minus_one(self, counts):
        v = VoteProfile.from_counts(tuple(counts))
        for y in range(len(counts)):
            for other in range(y + 1, len(counts)):
                assert c.gap_vote(v, y, other) + c.gap_vote(v, other, y) == -1


class TestGapLogit:
    def test_unanimous(self):
        logits = LogitProfile(np.tile([2.0, 1.0], (6, 1)))
        assert c.gap_logit(logits, 0, 1) == 6

    def test_exact_tie_counts_for_neither(self):
        logits = LogitProfile(np.array([[1.0, 1.0], [2.0, 1.0]]))
        assert logits.logit_win_count(0, 1) == 1
        assert logits.logit_win_count(1, 0) == 0
        assert c.gap_logit(logits, 0, 1) == 1

    def test_one_versus_three(self):
        rows = [[2.0, 1.0, 0.0]] + [[1.0, 2.0, 0.0]] * 3
        logits = LogitProfile(np.array(rows))
        assert c.gap_logit(logits, 0, 1) == 1 - 3 - 0 == -2

    def test_same_label_rejected(self):
        logits = LogitProfile(np.zeros((2, 2)))
        with pytest.raises(InvalidArgumentError):
            c.gap_logit(logits, 0, 0)


class TestPlurality:
    def test_unanimous(self):
        for t in (1, 4, 7):
            v = VoteProfile.from_counts((t, 0))
            assert c.certify_plurality(v).radius == t // 2

    def test_one_flip_breaks_three_two(self):
        v = VoteProfile.from_counts((3, 2))
        cert = c.certify_plurality(v)
        assert (cert.label, cert.radius) == (0, 0)
        # oracle agrees: one flipped vote reaches (2, 3)
        assert o.oracle_plurality(v, 0)
        assert not o.oracle_plurality(v, 1)

    def test_unanimous_high_label(self):
        v = VoteProfile.from_counts((0, 0, 7))
        cert = c.certify_plurality(v)
        assert (cert.label, cert.radius) == (2, 3)
        assert o.oracle_plurality(v, 3)
        assert not o.oracle_plurality(v, 4)

    def test_certificate_fields(self):
        cert = c.certify_plurality(VoteProfile.from_counts((4, 1)))
        assert cert.method == c.METHOD_PLURALITY
        assert cert.guarantee == c.GUARANTEE_FEATURE

    @settings(max_examples=100, deadline=None)
    @given(counts=counts_strategy)
    def test_relabeling_with_matching_tie_order(self, counts):
        """Conjugating labels and the tie order together preserves the radius."""
        rng = np.random.default_rng(sum(counts) + len(counts))
        perm = list(rng.permutation(len(counts)))
        relabeled = [0] * len(counts)
        for old, new in enumerate(perm):
            relabeled[new] = counts[old]
        base = c.plurality_radius_from_counts(counts)
        conjugated = c.plurality_radius_from_counts(relabeled, tie_order=perm)
        assert base == conjugated


class TestDpTable:
    def test_spot_values(self):
        table = c.DpTable(10)
        assert c.dp(0, 0, table) == 0
        assert c.dp(1, 1, table) == 1
        assert c.dp(3, 3, table) == 2

    def test_base_case_region(self):
        table = c.DpTable(5)
        for a in range(-2, 2):
            for b in range(-2, 2):
                expected = 1 if (a, b) == (1, 1) else 0
                assert table.lookup(a, b) == expected

    def test_symmetry_and_monotonicity(self):
        table = c.DpTable(16)
        for a in range(-2, 17):
            for b in range(-2, 17):
                assert table.lookup(a, b) == table.lookup(b, a)
                if a < 16:
                    assert table.lookup(a, b) <= table.lookup(a + 1, b)

    def test_negative_arguments_clamp_exactly(self):
        table = c.DpTable(12)
        for b in range(-2, 13):
            assert table.lookup(-2, b) == table.lookup(-9, b)

    def test_bounded_by_capacity(self):
        t_max = 12
        table = c.DpTable(t_max)
        for a in range(-2, t_max + 1):
            for b in range(-2, t_max + 1):
                assert 0 <= table.lookup(a, b) <= t_max


class TestRunoff:
    def test_binary_equals_plurality(self):
        rng = np.random.default_rng(2)
        for _ in range(400):
            T = int(rng.integers(1, 8))
            votes, logits = o.random_logit_profile(rng, T, 2)
            ro = c.certify_runoff(votes, logits)
            pl = c.certify_plurality(votes)
            assert (ro.label, ro.radius) == (pl.label, pl.radius)

    def test_runoff_can_beat_plurality(self):
        # Four submodels, three labels, all pairwise-preferring label 0:
        # plurality certifies nothing, run-off certifies one dimension.
        logits = LogitProfile(
            np.array(
                [
                    [3.0, 2.0, 1.0],
                    [3.0, 2.0, 1.0],
                    [2.0, 3.0, 1.0],
                    [2.0, 1.0, 3.0],
                ]
            )
        )
        votes = VoteProfile(logits.votes(), num_labels=3)
        assert votes.counts == (2, 1, 1)
        assert c.certify_plurality(votes).radius == 0
        cert = c.certify_runoff(votes, logits)
        assert (cert.label, cert.radius) == (0, 1)
        assert o.max_stable_runoff(votes, logits) == 1

    def test_soundness_on_random_profiles(self):
        rng = np.random.default_rng(11)
        for _ in range(250):
            T = int(rng.integers(2, 8))
            K = int(rng.integers(2, 4))
            votes, logits = o.random_logit_profile(rng, T, K)
            radius = c.certify_runoff(votes, logits).radius
            assert radius >= 0
            assert o.oracle_runoff(votes, logits, min(radius, T))

    def test_soundness_with_logit_ties(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            T = int(rng.integers(2, 6))
            K = int(rng.integers(2, 4))
            logits = LogitProfile(rng.integers(0, 3, size=(T, K)).astype(float))
            votes = VoteProfile(logits.votes(), num_labels=K)
            radius = c.certify_runoff(votes, logits).radius
            assert radius <= o.max_stable_runoff(votes, logits)

    def test_shared_table_matches_fresh_table(self):
        rng = np.random.default_rng(4)
        table = c.DpTable(6)
        for _ in range(50):
            votes, logits = o.random_logit_profile(rng, 6, 3)
            assert (
                c.certify_runoff(votes, logits, table).radius
                == c.certify_runoff(votes, logits).radius
            )


class TestTopK:
    def test_k1_equals_plurality_radius(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            T = int(rng.integers(2, 8))
            K = int(rng.integers(2, 5))
            votes = o.random_vote_profile(rng, T, K)
            leader = c.top_two(votes.counts)[0]
            assert c.certify_topk(votes, leader, 1) == c.certify_plurality(votes).radius

    def test_two_iteration_trace(self):
        votes = VoteProfile.from_counts((4, 1, 0))
        assert c.certify_topk(votes, 0, 1) == 1

    def test_zero_count_member_drains_plurality(self):
        # label 1 holds a top-2 seat with zero votes purely by tie order
        votes = VoteProfile.from_counts((7, 0, 0))
        radius = c.certify_topk(votes, 1, 2)
        assert radius == o.max_stable_topk(votes, 1, 2)
        assert radius == 0

    def test_not_in_topk_returns_minus_one(self):
        votes = VoteProfile.from_counts((5, 2, 0))
        assert c.certify_topk(votes, 2, 1) == -1

    def test_k_bounds(self):
        votes = VoteProfile.from_counts((2, 2))
        with pytest.raises(InvalidArgumentError):
            c.certify_topk(votes, 0, 4)
        with pytest.raises(InvalidArgumentError):
            c.certify_topk(votes, 0, 0)
        with pytest.raises(InvalidArgumentError):
            c.certify_topk(votes, 0, 2)  # k must stay below the label count

    @settings(max_examples=100, deadline=None)
    @given(counts=counts_strategy, k=st.integers(min_value=1, max_value=3))
    def test_matches_oracle(self, counts, k):
        votes = VoteProfile.from_counts(tuple(counts))
        if not (k < votes.num_models and k < votes.num_labels):
            return
        for y in range(votes.num_labels):
            assert c.certify_topk(votes, y, k) == o.max_stable_topk(votes, y, k)


class TestLabelFlipTag:
    def test_upgrade_keeps_radius(self):
        cert = c.certify_plurality(VoteProfile.from_counts((5, 1)))
        upgraded = c.tag_label_flip(cert, MODE_INSTANCE)
        assert upgraded.radius == cert.radius
        assert upgraded.label == cert.label
        assert upgraded.guarantee == c.GUARANTEE_FEATURE_LABEL_FLIP

    def test_feature_mode_rejected(self):
        cert = c.certify_plurality(VoteProfile.from_counts((5, 1)))
        with pytest.raises(InvalidUpgradeError):
            c.tag_label_flip(cert, MODE_FEATURE)
