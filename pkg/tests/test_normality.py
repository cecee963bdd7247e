import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tensor
from mondet.errors import DimensionMismatch, EmptyPool
from mondet.normality import (
    CalibrationVectors,
    DistanceHeatmap,
    ImageScore,
    ModelOfNormality,
    build_mon,
    calibration_vectors,
    distance_heatmap,
    image_score,
)
from mondet.tensorio import FeatureTensor
from oracles import heatmap_oracle, mean_max_oracle, mean_tensor_oracle


class TestBuildMon:
    def test_mean_of_identical_is_identity(self, rng):
        t = random_tensor(rng, (3, 3, 5))
        mon = build_mon([t, t])
        assert np.array_equal(mon.tensor.values, t.values)
        assert mon.n_source == 2

    def test_two_tensor_arithmetic(self):
        a = FeatureTensor(np.zeros((1, 1, 2)))
        b = FeatureTensor(np.array([[[2.0, 4.0]]]))
        mon = build_mon([a, b])
        assert np.array_equal(mon.tensor.values.ravel(), np.array([1.0, 2.0], dtype=np.float32))

    def test_matches_summation_oracle(self, rng):
        tensors = [random_tensor(rng, (2, 2, 3)) for _ in range(5)]
        mon = build_mon(tensors)
        expected = np.array(mean_tensor_oracle(tensors))
        np.testing.assert_allclose(mon.tensor.values, expected, rtol=1e-6, atol=1e-9)

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            build_mon([])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            build_mon([random_tensor(rng, (2, 2, 2)), random_tensor(rng, (2, 2, 3))])

    def test_mean_stays_within_elementwise_bounds(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 7))
            tensors = [random_tensor(rng, (3, 2, 4)) for _ in range(n)]
            stack = np.stack([t.values for t in tensors])
            mon = build_mon(tensors)
            assert (mon.tensor.values >= stack.min(axis=0)).all()
            assert (mon.tensor.values <= stack.max(axis=0)).all()

    def test_permutation_invariance_within_tolerance(self, rng):
        tensors = [random_tensor(rng, (4, 4, 6)) for _ in range(7)]
        reference = build_mon(tensors).tensor.values
        for _ in range(5):
            order = rng.permutation(len(tensors))
            permuted = build_mon([tensors[i] for i in order]).tensor.values
            np.testing.assert_allclose(permuted, reference, rtol=1e-6, atol=1e-9)


class TestDistanceHeatmap:
    def test_self_distance_is_zero(self, rng):
        t = random_tensor(rng, (4, 3, 8))
        mon = ModelOfNormality(tensor=t, n_source=1)
        assert np.array_equal(distance_heatmap(t, mon).values, np.zeros((4, 3)))

    def test_3_4_5_triangle(self):
        image = FeatureTensor(np.array([[[3.0, 4.0]]]))
        mon = ModelOfNormality(tensor=FeatureTensor(np.zeros((1, 1, 2))), n_source=1)
        assert distance_heatmap(image, mon).values.tolist() == [[5.0]]

    def test_matches_loop_oracle(self, rng):
        image = random_tensor(rng, (4, 4, 8))
        mon = build_mon([random_tensor(rng, (4, 4, 8)) for _ in range(3)])
        got = distance_heatmap(image, mon).values
        expected = np.array(heatmap_oracle(image.values, mon.tensor.values))
        np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        mon = ModelOfNormality(tensor=random_tensor(rng, (2, 2, 2)), n_source=1)
        with pytest.raises(DimensionMismatch):
            distance_heatmap(random_tensor(rng, (2, 2, 3)), mon)

    def test_scale_covariance(self, rng):
        image = random_tensor(rng, (3, 5, 6))
        mon_tensor = random_tensor(rng, (3, 5, 6))
        base = distance_heatmap(image, ModelOfNormality(mon_tensor, 1)).values
        for k in (0.0, 0.5, 2.0, 37.5):
            scaled = distance_heatmap(
                FeatureTensor(image.values * k),
                ModelOfNormality(FeatureTensor(mon_tensor.values * k), 1),
            ).values
            np.testing.assert_allclose(scaled, k * base, rtol=1e-6, atol=1e-9)

    def test_reverse_triangle_inequality_per_position(self, rng):
        for _ in range(10):
            a = random_tensor(rng, (4, 4, 8))
            b = random_tensor(rng, (4, 4, 8))
            m = ModelOfNormality(random_tensor(rng, (4, 4, 8)), 1)
            da = distance_heatmap(a, m).values
            db = distance_heatmap(b, m).values
            dab = distance_heatmap(a, ModelOfNormality(b, 1)).values
            assert (np.abs(da - db) <= dab + 1e-6).all()


class TestImageScore:
    def test_constant_heatmap(self):
        score = image_score(DistanceHeatmap(np.full((3, 4), 2.25)))
        assert score == ImageScore(d_mean=2.25, d_max=2.25)

    def test_small_grid_arithmetic(self):
        score = image_score(DistanceHeatmap(np.array([[1.0, 2.0], [3.0, 4.0]])))
        assert score == ImageScore(d_mean=2.5, d_max=4.0)

    def test_matches_reduction_oracle(self, rng):
        grid = np.abs(rng.normal(size=(14, 14)))
        score = image_score(DistanceHeatmap(grid))
        expected_mean, expected_max = mean_max_oracle(grid)
        assert score.d_max == expected_max
        assert math.isclose(score.d_mean, expected_mean, rel_tol=1e-9)

    def test_ordering_invariant_on_random_heatmaps(self, rng):
        for _ in range(50):
            h, w = rng.integers(1, 9, size=2)
            score = image_score(DistanceHeatmap(np.abs(rng.normal(size=(h, w)))))
            assert 0.0 <= score.d_mean <= score.d_max


class TestCalibrationVectors:
    def test_single_image_self_calibration_is_zero(self, rng):
        t = random_tensor(rng, (3, 3, 4))
        mon = build_mon([t])
        calib = calibration_vectors(mon, [t])
        assert calib.d_max.tolist() == [0.0]
        assert calib.d_mean.tolist() == [0.0]

    def test_identical_pool_is_all_zero(self, rng):
        t = random_tensor(rng, (2, 4, 3))
        pool = [t] * 4
        calib = calibration_vectors(build_mon(pool), pool)
        assert not calib.d_max.any()
        assert not calib.d_mean.any()

    def test_composes_the_per_image_oracles(self, rng):
        pool = [random_tensor(rng, (3, 3, 5)) for _ in range(5)]
        mon = build_mon(pool)
        calib = calibration_vectors(mon, pool)
        for i, t in enumerate(pool):
            grid = heatmap_oracle(t.values, mon.tensor.values)
            expected_mean, expected_max = mean_max_oracle(grid)
            assert math.isclose(calib.d_max[i], expected_max, rel_tol=1e-6)
            assert math.isclose(calib.d_mean[i], expected_mean, rel_tol=1e-6)

    def test_vector_order_follows_input_order(self, rng):
        pool = [random_tensor(rng, (2, 2, 4)) for _ in range(6)]
        mon = build_mon(pool)
        forward = calibration_vectors(mon, pool)
        backward = calibration_vectors(mon, pool[::-1])
        np.testing.assert_array_equal(forward.d_max, backward.d_max[::-1])

    def test_empty_pool(self, rng):
        mon = build_mon([random_tensor(rng, (2, 2, 2))])
        with pytest.raises(EmptyPool):
            calibration_vectors(mon, [])

    def test_elementwise_ordering_enforced(self):
        with pytest.raises(ValueError):
            CalibrationVectors(d_mean=np.array([2.0]), d_max=np.array([1.0]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
def test_scores_always_finite_nonnegative_ordered(seed, n):
    gen = np.random.default_rng(seed)
    pool = [random_tensor(gen, (3, 3, 4)) for _ in range(n)]
    mon = build_mon(pool)
    probe = random_tensor(gen, (3, 3, 4))
    score = image_score(distance_heatmap(probe, mon))
    assert math.isfinite(score.d_mean) and math.isfinite(score.d_max)
    assert 0.0 <= score.d_mean <= score.d_max
