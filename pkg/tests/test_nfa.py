"""NFA maps, significance, score activation, binomial variant, fusion."""

import math

import numpy as np
import pytest

from nfadetect.background import DegenerateModelError, estimate_background, make_model
from nfadetect.nfa import (
    NfaMap,
    fuse_scales,
    load_raster,
    nfa_binomial,
    nfa_gaussian_map,
    save_raster,
    sigm_alpha,
    significance_map,
)

# frozen oracle: (m, 65536 * erfc(m / sqrt(2))) at 50 digits
K1_NFA_TABLE = [
    (0.0, 65536.0),
    (0.25, 52598.364480087822),
    (0.5, 40440.632275892554),
    (0.75, 29704.500330740869),
    (1.0, 20795.261443303939),
    (1.5, 8756.5534847117644),
    (2.0, 2981.905294711745),
    (2.5, 813.91325358012959),
    (3.0, 176.93383480181975),
    (3.5, 30.491158647344338),
    (4.0, 4.1512130095506943),
    (4.5, 0.44533981180461848),
    (5.0, 0.037571994829349704),
    (5.5, 0.0024889999315288352),
    (6.0, 0.00012931401581038117),
    (7.0, 1.6774758975220417e-7),
    (8.0, 8.1539374439095129e-11),
    (10.0, 9.9874937558276847e-19),
    (12.0, 2.3284706339424554e-28),
    (15.0, 4.8116088167632088e-46),
]


def _k1_map_for_ms(ms, eta):
    """NFA map for a row of K=1 pixels at Mahalanobis distances ms."""
    model = make_model([0.0], [[1.0]], eta_test=eta)
    img = np.asarray(ms, dtype=np.float64).reshape(1, -1)
    return nfa_gaussian_map(img, model, eta_test=eta)


class TestGaussianMap:
    def test_pixel_at_mean_gives_eta(self):
        nfa = _k1_map_for_ms([0.0], eta=1024)
        assert nfa.log10_values[0, 0] == pytest.approx(math.log10(1024), abs=1e-12)

    def test_k2_closed_form(self):
        # NFA = eta * exp(-m^2/2) for two channels
        model = make_model([0.0, 0.0], np.eye(2), eta_test=100)
        img = np.zeros((1, 1, 2))
        img[0, 0] = [2.0, 0.0]  # m^2 = 4
        nfa = nfa_gaussian_map(img, model, eta_test=100)
        assert 10.0 ** nfa.log10_values[0, 0] == pytest.approx(100 * math.exp(-2.0),
                                                               rel=1e-12)

    def test_k1_oracle_table(self):
        ms = [m for m, _ in K1_NFA_TABLE]
        nfa = _k1_map_for_ms(ms, eta=65536)
        for (m, expected), got_log10 in zip(K1_NFA_TABLE, nfa.log10_values[0]):
            assert 10.0 ** got_log10 == pytest.approx(expected, rel=1e-9), m

    def test_eta_defaults_to_pixel_count(self):
        model = make_model([0.0], [[1.0]], eta_test=7)
        nfa = nfa_gaussian_map(np.zeros((4, 8)), model)
        assert nfa.eta_test == 32
        assert nfa.log10_values[0, 0] == pytest.approx(math.log10(32))

    def test_degenerate_model_rejected(self):
        model = estimate_background(np.full((4, 4), 1.0))
        with pytest.raises(DegenerateModelError):
            nfa_gaussian_map(np.zeros((4, 4)), model)

    def test_channel_mismatch_rejected(self):
        model = make_model([0.0, 0.0], np.eye(2), eta_test=16)
        with pytest.raises(ValueError):
            nfa_gaussian_map(np.zeros((4, 4)), model)

    def test_monotone_decreasing_in_m(self):
        ms = np.linspace(0.0, 12.0, 200)
        nfa = _k1_map_for_ms(ms, eta=65536)
        assert np.all(np.diff(nfa.log10_values[0]) < 0.0)

    def test_values_bounded_by_eta(self):
        rng = np.random.default_rng(1)
        img = rng.normal(0.0, 1.0, (32, 32))
        model = make_model([0.0], [[1.0]], eta_test=1024)
        nfa = nfa_gaussian_map(img, model)
        assert np.all(nfa.log10_values <= math.log10(1024) + 1e-12)

    def test_one_sided_halves_bright_tail(self):
        model = make_model([0.0], [[1.0]], eta_test=100)
        img = np.array([[3.0, -3.0]])
        two = nfa_gaussian_map(img, model, eta_test=100)
        one = nfa_gaussian_map(img, model, eta_test=100, one_sided=True)
        # bright pixel: exactly half the two-sided tail
        assert one.log10_values[0, 0] == pytest.approx(
            two.log10_values[0, 0] - math.log10(2.0), rel=1e-12)
        # dark pixel: nearly certain under the bright-tail test
        assert 10.0 ** one.log10_values[0, 1] == pytest.approx(100 * 0.99865, rel=1e-3)

    def test_one_sided_requires_k1(self):
        model = make_model([0.0, 0.0], np.eye(2), eta_test=16)
        with pytest.raises(ValueError):
            nfa_gaussian_map(np.zeros((2, 2, 2)), model, one_sided=True)


class TestSignificance:
    def test_sign_flip(self):
        nfa = _k1_map_for_ms([0.0, 3.0], eta=65536)
        sig = significance_map(nfa)
        assert np.array_equal(sig.values, -nfa.log10_values)
        assert sig.values[0, 0] == pytest.approx(-math.log10(65536))
        assert sig.values[0, 1] == pytest.approx(-2.2478108903583112, rel=1e-9)

    def test_nfa_one_maps_to_zero(self):
        nfa = NfaMap(log10_values=np.zeros((2, 2)), eta_test=4)
        assert np.all(significance_map(nfa).values == 0.0)


class TestSigmAlpha:
    def test_midpoint(self):
        assert sigm_alpha(3.7, alpha=2.0, tau=3.7) == 0.5

    def test_closed_form(self):
        assert sigm_alpha(2.0, alpha=1.0, tau=0.0) == pytest.approx(
            1.0 / (1.0 + math.exp(-2.0)), rel=1e-14)

    def test_floor_score(self):
        s = -math.log10(65536)
        got = sigm_alpha(s, alpha=2.0, tau=0.0)
        assert got == pytest.approx(1.0 / (1.0 + math.exp(2 * math.log10(65536))),
                                    rel=1e-12)
        assert got == pytest.approx(6.55e-5, rel=1e-2)

    def test_monotone_and_limits(self):
        s = np.linspace(-500, 500, 1001)
        v = sigm_alpha(s, alpha=1.3, tau=-2.0)
        assert np.all(np.diff(v) >= 0.0)
        assert np.all((v >= 0.0) & (v <= 1.0))
        assert v[0] < 1e-200 and v[-1] == 1.0  # limits 0 and 1

    def test_preserves_ranking(self):
        rng = np.random.default_rng(2)
        s = rng.normal(0.0, 5.0, 500)
        v = sigm_alpha(s, alpha=0.7, tau=1.0)
        assert np.array_equal(np.argsort(s), np.argsort(v))

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            sigm_alpha(0.0, alpha=0.0)


class TestBinomialNfa:
    def test_k_zero_exact(self):
        for n_tests in [1, 10, 1000]:
            assert nfa_binomial(0, 10, 0.3, n_tests) == float(n_tests)

    def test_impossible_event(self):
        assert nfa_binomial(11, 10, 0.3, 100) == 0.0

    def test_spec_fixture(self):
        # n=10, p=0.1, k=3: tail 0.0701908... times 1000
        got = nfa_binomial(3, 10, 0.1, 1000)
        assert got == pytest.approx(70.190825, rel=1e-6)

    def test_matches_brute_force_summation(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 61))
            k = int(rng.integers(0, n + 2))
            p = float(rng.uniform(0.01, 0.99))
            brute = sum(math.comb(n, j) * p ** j * (1 - p) ** (n - j)
                        for j in range(k, n + 1))
            got = nfa_binomial(k, n, p, 7)
            assert got == pytest.approx(7 * brute, rel=1e-12, abs=1e-300)

    def test_nonincreasing_in_k(self):
        vals = [nfa_binomial(k, 40, 0.25, 100) for k in range(0, 42)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_edge_probabilities(self):
        assert nfa_binomial(3, 10, 0.0, 50) == 0.0
        assert nfa_binomial(3, 10, 1.0, 50) == 50.0

    def test_validation(self):
        with pytest.raises(ValueError):
            nfa_binomial(1, 0, 0.5, 10)
        with pytest.raises(ValueError):
            nfa_binomial(1, 10, 1.5, 10)
        with pytest.raises(ValueError):
            nfa_binomial(-1, 10, 0.5, 10)


class TestFuseScales:
    def test_single_map_identity(self):
        from nfadetect.nfa import SignificanceMap

        vals = np.arange(12.0).reshape(3, 4)
        fused = fuse_scales([SignificanceMap(vals)], [1.0], (3, 4))
        assert np.array_equal(fused.values, vals)

    def test_max_against_zero_map(self):
        from nfadetect.nfa import SignificanceMap

        rng = np.random.default_rng(4)
        vals = rng.normal(0.0, 1.0, (5, 5))
        zero = SignificanceMap(np.zeros((5, 5)))
        fused = fuse_scales([zero, SignificanceMap(vals)], [1.0, 1.0], (5, 5))
        assert np.array_equal(fused.values, np.maximum(vals, 0.0))

    def test_weight_flips_argmax(self):
        from nfadetect.nfa import SignificanceMap

        a = SignificanceMap(np.full((2, 2), 3.0))
        b = SignificanceMap(np.full((2, 2), 4.0))
        equal = fuse_scales([a, b], [1.0, 1.0], (2, 2))
        assert np.all(equal.values == 4.0)  # second scale dominates
        weighted = fuse_scales([a, b], [2.0, 1.0], (2, 2))
        assert np.all(weighted.values == 6.0)  # weight 2 flips the winner

    def test_nearest_neighbor_upsampling(self):
        from nfadetect.nfa import SignificanceMap

        small = SignificanceMap(np.array([[1.0, 2.0], [3.0, 4.0]]))
        fused = fuse_scales([small], [1.0], (4, 4))
        expected = np.array([[1.0, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]])
        assert np.array_equal(fused.values, expected)

    def test_brute_force_per_pixel(self):
        from nfadetect.nfa import SignificanceMap

        rng = np.random.default_rng(5)
        m1 = rng.normal(size=(4, 4))
        m2 = rng.normal(size=(2, 2))
        w = [1.5, 0.75]
        fused = fuse_scales([SignificanceMap(m1), SignificanceMap(m2)], w, (4, 4))
        for r in range(4):
            for c in range(4):
                expect = max(w[0] * m1[r, c], w[1] * m2[r // 2, c // 2])
                assert fused.values[r, c] == expect

    def test_validation(self):
        from nfadetect.nfa import SignificanceMap

        with pytest.raises(ValueError):
            fuse_scales([], [], (2, 2))
        with pytest.raises(ValueError):
            fuse_scales([SignificanceMap(np.zeros((2, 2)))], [0.0], (2, 2))
        with pytest.raises(ValueError):
            fuse_scales([SignificanceMap(np.zeros((2, 2)))], [1.0, 1.0], (2, 2))


class TestRasterIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        vals = rng.normal(0.0, 10.0, (17, 9))
        path = tmp_path / "map.nfa"
        save_raster(path, vals)
        back = load_raster(path)
        assert back.shape == (17, 9)
        assert np.array_equal(back, vals.astype(np.float32))
        assert path.stat().st_size == 8 + 17 * 9 * 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"JUNKXXXX" + b"\x00" * 16)
        with pytest.raises(ValueError):
            load_raster(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "map.nfa"
        save_raster(path, np.zeros((4, 4)))
        data = path.read_bytes()
        path.write_bytes(data[:-7])
        with pytest.raises(ValueError):
            load_raster(path)
