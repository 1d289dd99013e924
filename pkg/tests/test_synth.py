"""Synthetic scene generation: determinism, moments, injection geometry."""

import math

import numpy as np
import pytest

from nfadetect.background import make_model
from nfadetect.nfa import nfa_gaussian_map
from nfadetect.synth import (
    SynthScene,
    gen_dataset,
    gen_noise_image,
    inject_target,
    splitmix64,
)


class TestGenNoise:
    def test_zero_covariance_constant(self):
        img = gen_noise_image(4, 5, 1, 7.0, np.zeros((1, 1)), seed=1)
        assert np.all(img == 7.0)

    def test_seed_determinism(self):
        a = gen_noise_image(16, 16, 2, [0.0, 1.0], np.eye(2), seed=42)
        b = gen_noise_image(16, 16, 2, [0.0, 1.0], np.eye(2), seed=42)
        assert np.array_equal(a, b)
        c = gen_noise_image(16, 16, 2, [0.0, 1.0], np.eye(2), seed=43)
        assert not np.array_equal(a, c)

    def test_large_sample_moments(self):
        n = 512
        img = gen_noise_image(n, n, 1, 10.0, np.array([[4.0]]), seed=7)
        # mean within 4 sigma / sqrt(N), variance within 5%
        assert abs(img.mean() - 10.0) < 4 * 2.0 / n
        assert abs(img.var() - 4.0) < 0.05 * 4.0

    def test_cross_channel_covariance(self):
        cov = np.array([[2.0, 1.2], [1.2, 3.0]])
        img = gen_noise_image(400, 400, 2, [0.0, 0.0], cov, seed=11)
        flat = img.reshape(-1, 2)
        emp = np.cov(flat.T, bias=True)
        assert np.allclose(emp, cov, rtol=0.05)

    def test_singular_psd_covariance_accepted(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank 1
        img = gen_noise_image(64, 64, 2, [0.0, 0.0], cov, seed=3)
        assert np.allclose(img[:, :, 0], img[:, :, 1], atol=1e-12)

    def test_non_psd_rejected(self):
        with pytest.raises(ValueError):
            gen_noise_image(4, 4, 2, [0.0, 0.0],
                            np.array([[1.0, 2.0], [2.0, 1.0]]), seed=0)

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_noise_image(0, 4, 1, 0.0, np.eye(1), seed=0)
        with pytest.raises(ValueError):
            gen_noise_image(4, 4, 2, [0.0, 0.0], np.eye(3), seed=0)


class TestInjectTarget:
    def test_point_raises_pixel_exactly(self):
        img = np.zeros((8, 8))
        out, gt = inject_target(img, (3, 4), amplitude=5.0, sigma=1.0)
        assert out[3, 4] == 5.0
        assert np.count_nonzero(out) == 1
        assert gt.box == (4, 3, 4, 3)
        assert gt.extent == 1
        assert np.all(img == 0.0)  # input untouched

    def test_zero_amplitude_emits_gt(self):
        img = np.ones((8, 8))
        out, gt = inject_target(img, (2, 2), amplitude=0.0)
        assert np.array_equal(out, img)
        assert gt.extent == 1

    def test_blob_radius_3_support(self):
        img = np.zeros((16, 16))
        out, gt = inject_target(img, (8, 8), amplitude=4.0, radius=3,
                                profile="gaussian_blob", sigma=2.0)
        # disk-truncated 7x7 patch: 29 pixels, box 7x7
        assert gt.box == (5, 5, 11, 11)
        assert gt.extent == 29
        assert np.count_nonzero(out) == 29
        assert out[8, 8] == pytest.approx(8.0)  # peak = amplitude * sigma
        # one step away: exp(-1/(2*(3/2)^2)) of the peak
        assert out[8, 9] == pytest.approx(8.0 * math.exp(-1.0 / 4.5))

    def test_blob_clipped_at_edge(self):
        img = np.zeros((10, 10))
        out, gt = inject_target(img, (0, 0), amplitude=1.0, radius=2,
                                profile="gaussian_blob")
        assert gt.box[0] == 0 and gt.box[1] == 0
        assert gt.extent < 13

    def test_radius_cap_for_blob(self):
        with pytest.raises(ValueError):
            inject_target(np.zeros((64, 64)), (32, 32), 1.0, radius=5,
                          profile="gaussian_blob")

    def test_center_out_of_bounds(self):
        with pytest.raises(ValueError):
            inject_target(np.zeros((8, 8)), (8, 0), 1.0)

    def test_point_target_nfa_closed_form(self):
        # amplitude a on the mean raises m to exactly a under the true model
        eta = 65536
        model = make_model([0.0], [[1.0]], eta_test=eta)
        img = np.zeros((256, 256))
        out, gt = inject_target(img, (128, 128), amplitude=5.0, sigma=1.0)
        nfa = nfa_gaussian_map(out, model, eta_test=eta)
        got = 10.0 ** nfa.log10_values[128, 128]
        assert got == pytest.approx(0.037571994829349704, rel=1e-9)


class TestSplitmix:
    def test_known_stream_values(self):
        # splitmix64 of seed 0: published reference values
        stream = splitmix64(0)
        assert next(stream) == 0xE220A8397B1DCDAF
        assert next(stream) == 0x6E789E6AA1B965F4
        assert next(stream) == 0x06C45D188009454F

    def test_distinct_per_image(self):
        stream = splitmix64(123)
        vals = [next(stream) for _ in range(100)]
        assert len(set(vals)) == 100


class TestGenDataset:
    def test_empty(self):
        assert gen_dataset(0) == []

    def test_deterministic_regeneration(self):
        a = gen_dataset(3, h=32, w=32, seed=5, amplitude=4.0, radius=2,
                        profile="gaussian_blob")
        b = gen_dataset(3, h=32, w=32, seed=5, amplitude=4.0, radius=2,
                        profile="gaussian_blob")
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.image, sb.image)
            assert sa.gts == sb.gts
            assert sa.seed == sb.seed

    def test_prefix_stability(self):
        # generating more images never changes the earlier ones
        short = gen_dataset(2, h=16, w=16, seed=9)
        longer = gen_dataset(5, h=16, w=16, seed=9)
        for sa, sb in zip(short, longer):
            assert np.array_equal(sa.image, sb.image)

    def test_gt_count(self):
        scenes = gen_dataset(10, h=32, w=32, targets_per_image=1, seed=2)
        assert sum(len(s.gts) for s in scenes) == 10
        assert all(isinstance(s, SynthScene) for s in scenes)

    def test_blob_supports_inside_image(self):
        scenes = gen_dataset(20, h=64, w=64, seed=3, amplitude=4.0, radius=2,
                             profile="gaussian_blob")
        for scene in scenes:
            for gt in scene.gts:
                x0, y0, x1, y1 = gt.box
                assert gt.extent == 13  # never clipped thanks to the margin
                assert (x1 - x0 + 1, y1 - y0 + 1) == (5, 5)


class TestFalseAlarmCalibration:
    def test_per_pixel_rate_matches_epsilon(self):
        """P(NFA <= eps) = eps/eta per pixel under the true model."""
        eta = 256 * 256
        model = make_model([0.0], [[1.0]], eta_test=eta)
        total_pixels = 0
        hits = {0.1: 0, 1.0: 0, 10.0: 0}
        for i in range(20):  # 1.3M pixels
            img = gen_noise_image(256, 256, 1, 0.0, np.eye(1), seed=1000 + i)
            nfa = nfa_gaussian_map(img, model, eta_test=eta)
            total_pixels += nfa.log10_values.size
            for eps in hits:
                hits[eps] += int(np.sum(nfa.log10_values <= math.log10(eps)))
        for eps, count in hits.items():
            p = eps / eta
            expected = total_pixels * p
            se = math.sqrt(total_pixels * p * (1 - p))
            assert abs(count - expected) <= 3 * se, (eps, count, expected)
