import math

import numpy as np
import pytest
from scipy.stats import special_ortho_group

from lbm.core import RngStream
from lbm.data import PointToBimodal
from lbm.errors import ShapeError
from lbm.evaluation import conditional_coverage, energy_distance, paired_metrics, sliced_wasserstein


class TestEnergyDistance:
    def test_identical(self, rng):
        a = rng.standard_normal((300, 3))
        assert energy_distance(a, a) <= 1e-6

    def test_singletons(self):
        assert energy_distance(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(10.0)

    def test_ordering(self):
        for seed in range(10):
            g = np.random.default_rng(seed)
            ref = g.standard_normal((2000, 1))
            same = g.standard_normal((2000, 1))
            shifted = 2 + g.standard_normal((2000, 1))
            assert energy_distance(ref, shifted) > energy_distance(ref, same)

    def test_symmetric_and_rotation_invariant(self, rng):
        a, b = rng.standard_normal((200, 3)), 0.5 + rng.standard_normal((150, 3))
        assert energy_distance(a, b) == pytest.approx(energy_distance(b, a), rel=1e-12)
        rot = special_ortho_group.rvs(3, random_state=1)
        assert energy_distance(a @ rot.T, b @ rot.T) == pytest.approx(energy_distance(a, b), abs=1e-5)

    def test_images_flattened(self, rng):
        a = rng.random((10, 1, 4, 4))
        assert energy_distance(a, a.reshape(10, 16)) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            energy_distance(np.zeros((3, 2)), np.zeros((3, 3)))


class TestSlicedWasserstein:
    def test_identical(self, rng):
        a = rng.standard_normal((100, 2))
        assert sliced_wasserstein(a, a, 32, RngStream(0)) == 0.0

    def test_one_dimensional(self):
        a = np.array([[0.0], [1.0]])
        b = np.array([[3.0], [2.0]])
        assert sliced_wasserstein(a, b, 4, RngStream(0)) == 2.0

    def test_translation_1d(self, rng):
        a = rng.standard_normal((50, 1))
        assert sliced_wasserstein(a, a - 1.25, 8, RngStream(0)) == pytest.approx(1.25, abs=1e-12)

    def test_symmetric_with_same_directions(self, rng):
        a, b = rng.standard_normal((80, 2)), rng.standard_normal((80, 2)) + 1
        assert sliced_wasserstein(a, b, 16, RngStream(3)) == pytest.approx(sliced_wasserstein(b, a, 16, RngStream(3)))

    def test_unequal_sizes(self, rng):
        a, b = rng.standard_normal((200, 2)), rng.standard_normal((50, 2))
        assert sliced_wasserstein(a, b, 16, RngStream(0)) >= 0

    def test_errors(self):
        with pytest.raises(ShapeError):
            sliced_wasserstein(np.zeros((0, 2)), np.zeros((3, 2)), 4, RngStream(0))
        with pytest.raises(ValueError):
            sliced_wasserstein(np.zeros((3, 2)), np.zeros((3, 2)), 0, RngStream(0))


class TestPaired:
    def test_exact(self, rng):
        a = rng.random((4, 1, 8, 8))
        mse, psnr = paired_metrics(a, a)
        assert mse == 0.0 and psnr == math.inf

    def test_offset(self):
        a = np.full((2, 1, 4, 4), 0.3)
        mse, psnr = paired_metrics(a + 0.1, a)
        assert mse == pytest.approx(0.01) and psnr == pytest.approx(20.0)

    def test_symmetric(self, rng):
        a, b = rng.random((3, 5)), rng.random((3, 5))
        assert paired_metrics(a, b)[0] == paired_metrics(b, a)[0]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            paired_metrics(np.zeros((2, 3)), np.zeros((3, 2)))


class TestCoverage:
    centers = PointToBimodal.mode_centers

    def test_collapse(self):
        cov = conditional_coverage(np.tile([[-2.0, 0.0]], (50, 1)), self.centers, 1.0)
        assert cov.fractions == (1.0, 0.0) and not cov.covered

    def test_true_target(self):
        n = 20_000
        _, x1, _ = PointToBimodal().sample(n, RngStream(0))
        cov = conditional_coverage(x1, self.centers, 1.0)
        se = math.sqrt(0.25 / n)
        assert all(abs(f - 0.5) <= 3 * se for f in cov.fractions) and cov.covered

    def test_errors(self):
        with pytest.raises(ShapeError):
            conditional_coverage(np.zeros((0, 2)), self.centers, 1.0)
        with pytest.raises(ValueError):
            conditional_coverage(np.zeros((3, 2)), self.centers, 0.0)
