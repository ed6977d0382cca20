"""Scaling transforms, stratified splits, and batch iteration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanmdn.channels import builtin_scenario
from chanmdn.dataset import generate_dataset
from chanmdn.pipeline import (
    SplitSpec,
    batches,
    inverse_scale,
    log_scale,
    normalize_distance,
    scale,
    split,
)


class TestLogScale:
    def test_reference_points(self):
        assert log_scale(0.0, 2.0) == pytest.approx(0.3010300, abs=1e-7)
        assert log_scale(8.0, 2.0) == pytest.approx(1.0, rel=1e-12)
        assert log_scale(-425.0, 435.0) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_nonpositive_argument(self):
        with pytest.raises(ValueError):
            log_scale(-2.0, 2.0)
        with pytest.raises(ValueError):
            log_scale(-3.0, 2.0)

    def test_inverse_points(self):
        assert inverse_scale(1.0, 2.0) == pytest.approx(8.0, rel=1e-12)
        assert inverse_scale(0.0, 435.0) == pytest.approx(-434.0, rel=1e-12)
        assert inverse_scale(log_scale(2.0546, 2.0), 2.0) == pytest.approx(
            2.0546, rel=1e-12
        )

    @given(st.floats(min_value=-1.9, max_value=250.0), st.sampled_from([2.0, 435.0]))
    @settings(max_examples=200)
    def test_round_trip(self, x, coef):
        if x + coef <= 0:
            return
        back = inverse_scale(log_scale(x, coef), coef)
        assert abs(back - x) <= 1e-9 * (abs(x) + coef)


class TestNormalizeDistance:
    def test_values(self):
        assert normalize_distance(300.0, 300.0) == 1.0
        assert normalize_distance(10.0, 300.0) == pytest.approx(1.0 / 30.0, rel=1e-12)
        assert normalize_distance(150.0, 300.0) == 0.5

    def test_domain(self):
        with pytest.raises(ValueError):
            normalize_distance(0.0, 300.0)
        with pytest.raises(ValueError):
            normalize_distance(301.0, 300.0)


@pytest.fixture(scope="module")
def small_n1():
    return generate_dataset(builtin_scenario("n1"), n_per_d=100, seed=5)


class TestSplit:
    def test_sizes_and_disjointness(self, small_n1):
        spec = SplitSpec(1800, 600, 600, seed=3)
        train, val, test = split(small_n1, spec)
        assert (len(train), len(val), len(test)) == (1800, 600, 600)
        # disjointness via multiset accounting per distance value
        all_p = np.concatenate([train.p_r, val.p_r, test.p_r])
        assert np.unique(all_p).size == all_p.size

    def test_determinism(self, small_n1):
        a = split(small_n1, SplitSpec(1800, 600, 600, seed=3))
        b = split(small_n1, SplitSpec(1800, 600, 600, seed=3))
        for x, y in zip(a, b):
            assert np.array_equal(x.p_r, y.p_r) and np.array_equal(x.d, y.d)

    def test_stratification_within_one(self, small_n1):
        spec = SplitSpec(1500, 700, 500, seed=9)
        for part, n in zip(split(small_n1, spec), (1500, 700, 500)):
            per_d = [np.sum(part.d == d) for d in small_n1.scenario.distance_grid]
            assert max(per_d) - min(per_d) <= 1
            assert abs(np.mean(per_d) - n / 30) < 1

    def test_insufficient_samples(self, small_n1):
        with pytest.raises(ValueError):
            split(small_n1, SplitSpec(2000, 600, 600, seed=3))


class TestBatches:
    @staticmethod
    def _scaled(n):
        data = generate_dataset(builtin_scenario("n1"), n_per_d=n // 30, seed=1)
        return scale(data)

    def test_paper_scale_batch_count(self):
        scaled = self._scaled(216_000)
        sizes = [y.size for _, y in batches(scaled, 10_000, epoch_seed=0)]
        assert len(sizes) == 22
        assert sizes[-1] == 6000
        assert sum(sizes) == 216_000

    def test_small_dataset_single_batch(self):
        scaled = self._scaled(60)
        sizes = [y.size for _, y in batches(scaled, 10_000, epoch_seed=0)]
        assert sizes == [60]

    def test_epochs_reshuffle_same_multiset(self):
        scaled = self._scaled(900)
        a = np.concatenate([y for _, y in batches(scaled, 128, epoch_seed=0)])
        b = np.concatenate([y for _, y in batches(scaled, 128, epoch_seed=1)])
        assert not np.array_equal(a, b)
        assert np.array_equal(np.sort(a), np.sort(b))

    def test_each_sample_exactly_once(self):
        scaled = self._scaled(300)
        for batch_size in (1, 7, 100, 299, 300, 1000):
            got = np.concatenate(
                [y for _, y in batches(scaled, batch_size, epoch_seed=2)]
            )
            assert np.array_equal(np.sort(got), np.sort(scaled.s))

    def test_rejects_bad_batch_size(self):
        scaled = self._scaled(60)
        with pytest.raises(ValueError):
            list(batches(scaled, 0, epoch_seed=0))


class TestScale:
    def test_fields(self, small_n1):
        scaled = scale(small_n1)
        assert np.all(scaled.d_norm > 0) and np.all(scaled.d_norm <= 1.0)
        assert np.allclose(
            scaled.s, np.log10(small_n1.p_r + small_n1.scenario.scaling_coef)
        )
        groups = scaled.by_distance()
        assert len(groups) == 30
        assert all(g.size == 100 for _, g in groups)
