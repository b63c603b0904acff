import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitvote.errors import InvalidConfigurationError
from splitvote.partition import (
    load_partition,
    overlapping_partition,
    random_partition,
    save_partition,
    spread_assignment,
    strided_partition,
)


def as_sorted(subsets):
    return [sorted(s) for s in subsets]


class TestStrided:
    def test_mod_formula(self):
        part = strided_partition(10, 3)
        assert as_sorted(part.subsets) == [[3, 6, 9], [1, 4, 7, 10], [2, 5, 8]]

    def test_single_model_gets_everything(self):
        part = strided_partition(7, 1)
        assert as_sorted(part.subsets) == [list(range(1, 8))]

    def test_singletons_in_mod_order(self):
        part = strided_partition(6, 6)
        assert as_sorted(part.subsets) == [[6], [1], [2], [3], [4], [5]]

    def test_too_many_models_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            strided_partition(4, 5)
        with pytest.raises(InvalidConfigurationError):
            strided_partition(4, 0)


class TestRandom:
    def test_balanced_sizes(self):
        part = random_partition(10, 3, seed=42)
        sizes = sorted((len(s) for s in part.subsets), reverse=True)
        assert sizes == [4, 3, 3]

    def test_singletons(self):
        part = random_partition(5, 5, seed=1)
        assert sorted(len(s) for s in part.subsets) == [1] * 5
        assert set().union(*part.subsets) == set(range(1, 6))

    def test_same_seed_identical(self):
        assert random_partition(10, 3, seed=9) == random_partition(10, 3, seed=9)

    def test_different_seeds_differ(self):
        a = random_partition(40, 5, seed=1)
        b = random_partition(40, 5, seed=2)
        assert a.subsets != b.subsets

    def test_rng_metadata_recorded(self):
        part = random_partition(10, 3, seed=7)
        assert part.seed == 7
        assert part.rng_algorithm == "numpy-pcg64"


@settings(max_examples=60, deadline=None)
@given(
    d=st.integers(min_value=1, max_value=60),
    models=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=2**31),
    strided=st.booleans(),
)
def test_exact_partition_property(d, models, seed, strided):
    if models > d:
        models = d
    part = strided_partition(d, models) if strided else random_partition(d, models, seed)
    everything = sorted(j for s in part.subsets for j in s)
    assert everything == list(range(1, d + 1))
    sizes = [len(s) for s in part.subsets]
    assert max(sizes) - min(sizes) <= 1


class TestSpread:
    def test_phi_one_is_one_to_one(self):
        smap = spread_assignment(3, 1, seed=0)
        images = [smap.models_for_subset(l) for l in range(1, 4)]
        assert all(len(img) == 1 for img in images)
        assert set().union(*images) == {1, 2, 3}

    def test_double_counting(self):
        smap = spread_assignment(2, 2, seed=13)
        assert smap.n_subsets == 4
        for l in range(1, 5):
            assert len(smap.models_for_subset(l)) == 2
        for t in range(1, 5):
            assert len(smap.subsets_for_model(t)) == 2
        # shift construction: subset l maps to {tau + l mod 4} over the drawn taus
        for l in range(1, 5):
            expected = {((tau + l - 1) % 4) + 1 for tau in smap.offsets}
            assert smap.models_for_subset(l) == expected

    def test_deterministic(self):
        assert spread_assignment(3, 2, seed=5) == spread_assignment(3, 2, seed=5)

    def test_zero_phi_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            spread_assignment(3, 0, seed=0)


class TestOverlapping:
    def test_tight_fit_gives_singletons(self):
        part, smap = overlapping_partition(8, 4, 2, seed=3)
        assert sorted(len(s) for s in part.subsets) == [1] * 8
        assert all(len(e) == 2 for e in part.effective_sets())

    def test_balanced_fine_subsets_and_usage(self):
        part, smap = overlapping_partition(10, 2, 2, seed=11)
        assert sorted((len(s) for s in part.subsets), reverse=True) == [3, 3, 2, 2]
        usage = {j: 0 for j in range(1, 11)}
        for eff in part.effective_sets():
            for j in eff:
                usage[j] += 1
        assert all(v == 2 for v in usage.values())

    def test_pigeonhole_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            overlapping_partition(4, 4, 2, seed=0)

    def test_effective_size_sums_to_phi_d(self):
        for phi, models, d in [(2, 3, 17), (3, 2, 11), (1, 4, 9)]:
            part, _ = overlapping_partition(d, models, phi, seed=2)
            assert sum(len(e) for e in part.effective_sets()) == phi * d

    def test_deterministic(self):
        a = overlapping_partition(12, 3, 2, seed=8)
        b = overlapping_partition(12, 3, 2, seed=8)
        assert a == b


class TestSerialization:
    def test_round_trip_disjoint(self, tmp_path):
        part = random_partition(13, 4, seed=21)
        path = tmp_path / "part.json"
        save_partition(part, path)
        assert load_partition(path) == part

    def test_round_trip_overlapping(self, tmp_path):
        part, _ = overlapping_partition(12, 3, 2, seed=4)
        path = tmp_path / "part.json"
        save_partition(part, path)
        loaded = load_partition(path)
        assert loaded == part
        assert loaded.effective_sets() == part.effective_sets()

    def test_disk_indices_are_zero_based(self, tmp_path):
        import json

        part = strided_partition(5, 1)
        path = tmp_path / "part.json"
        save_partition(part, path)
        doc = json.loads(path.read_text())
        assert doc["subsets"] == [[0, 1, 2, 3, 4]]
