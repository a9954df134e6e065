import math

import numpy as np
import pytest
from scipy.stats import norm

from pamlab.constellations import (
    InputDistribution,
    cross_qam32,
    framed_cross_qam32,
    pam_constellation,
)
from pamlab.rates import (
    Quadrature,
    RateCurve,
    hd_bit_stats,
    hd_symbol_stats,
    optimize_input_bmd,
    optimize_input_smd,
    psnr_at_rate,
    psnr_to_sigma,
    rate_hd_bmd,
    rate_hd_smd,
    rate_sd_bmd,
    rate_sd_smd,
)

from _mc import mc_rate_stats

PAM6 = pam_constellation(6, "pas")
PAM4 = pam_constellation(4)
U6 = InputDistribution.uniform(6)
U4 = InputDistribution.uniform(4)
MC_SAMPLES = 2_000_000


def Q(x):
    return norm.sf(x)


class TestSdSmd:
    def test_pam2_noiseless_limit(self):
        c = pam_constellation(2)
        u = InputDistribution.uniform(2)
        assert rate_sd_smd(c, u, 60.0) == pytest.approx(1.0, abs=1e-9)

    def test_low_psnr_limit(self):
        assert rate_sd_smd(PAM6, U6, -40.0) == pytest.approx(0.0, abs=1e-4)

    def test_high_psnr_limit_is_entropy(self):
        assert rate_sd_smd(PAM6, U6, 70.0) == pytest.approx(math.log2(6), abs=1e-4)

    def test_monotone_in_psnr(self):
        vals = [rate_sd_smd(PAM6, U6, p) for p in np.arange(10, 30, 2.0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_against_monte_carlo(self):
        mc = mc_rate_stats(PAM4, U4, 15.0, MC_SAMPLES, seed=101)
        est, se = mc["mi"]
        assert abs(rate_sd_smd(PAM4, U4, 15.0) - est) < 3 * se

    def test_node_doubling_stable(self):
        r1 = rate_sd_smd(PAM6, U6, 22.0, Quadrature("gauss_hermite", 128))
        r2 = rate_sd_smd(PAM6, U6, 22.0, Quadrature("gauss_hermite", 256))
        assert abs(r1 - r2) < 1e-5

    def test_trapezoid_cross_check(self):
        gh = rate_sd_smd(PAM6, U6, 22.0, Quadrature("gauss_hermite", 128))
        tz = rate_sd_smd(PAM6, U6, 22.0, Quadrature("trapezoid", 4001, 8.0))
        assert abs(gh - tz) < 1e-5

    def test_2d_halving_bound(self):
        c = cross_qam32()
        u = InputDistribution.uniform(32)
        r = rate_sd_smd(c, u, 22.0)
        assert 0.0 < r < 2.5

    def test_mismatched_distribution(self):
        with pytest.raises(ValueError):
            rate_sd_smd(PAM6, U4, 20.0)


class TestSdBmd:
    def test_pam2_equals_smd(self):
        c = pam_constellation(2)
        u = InputDistribution.uniform(2)
        for p in (0.0, 6.0, 12.0):
            assert rate_sd_bmd(c, u, p) == pytest.approx(rate_sd_smd(c, u, p), abs=1e-12)

    def test_never_exceeds_smd(self):
        for p in (16.0, 20.0, 24.0):
            assert rate_sd_bmd(PAM6, U6, p) <= rate_sd_smd(PAM6, U6, p) + 1e-12

    def test_framed_beats_cross_everywhere(self):
        u = InputDistribution.uniform(32)
        fc, cq = framed_cross_qam32(), cross_qam32()
        for p in np.arange(20.0, 24.01, 1.0):
            assert rate_sd_bmd(fc, u, p) > rate_sd_bmd(cq, u, p)

    def test_against_monte_carlo(self):
        mc = mc_rate_stats(PAM6, U6, 22.0, MC_SAMPLES, seed=102)
        est, se = mc["bmd"]
        assert abs(rate_sd_bmd(PAM6, U6, 22.0) - est) < 3 * se

    def test_unlabeled_rejected(self):
        from pamlab.constellations import qam36

        with pytest.raises(ValueError):
            rate_sd_bmd(qam36(), InputDistribution.uniform(36), 20.0)


class TestHdSymbol:
    def test_delta_vanishes_at_high_psnr(self):
        assert hd_symbol_stats(PAM6, U6, 60.0) == pytest.approx(0.0, abs=1e-12)

    def test_pam4_closed_form(self):
        # uniform 1-D MAP = nearest neighbor: delta = 2(M-1)/M * Q(d/2sigma)
        psnr = 20.0
        sigma = psnr_to_sigma(psnr)
        expect = 2 * 3 / 4 * Q((1 / 3) / (2 * sigma))
        assert hd_symbol_stats(PAM4, U4, psnr) == pytest.approx(expect, rel=1e-9)

    def test_pam4_against_monte_carlo(self):
        mc = mc_rate_stats(PAM4, U4, 20.0, MC_SAMPLES, seed=103)
        est, se = mc["delta"]
        assert abs(hd_symbol_stats(PAM4, U4, 20.0) - est) < 3 * se

    def test_2d_cross_against_monte_carlo(self):
        c = cross_qam32()
        u = InputDistribution.uniform(32)
        mc = mc_rate_stats(c, u, 25.0, MC_SAMPLES, seed=104)
        est, se = mc["delta"]
        assert abs(hd_symbol_stats(c, u, 25.0) - est) < 3 * se

    def test_rate_formula(self):
        # rate recomputed from an independently supplied delta
        delta = hd_symbol_stats(PAM6, U6, 24.0)
        h2 = -delta * math.log2(delta) - (1 - delta) * math.log2(1 - delta)
        expect = math.log2(6) - (h2 + delta * math.log2(5))
        assert rate_hd_smd(PAM6, U6, 24.0) == pytest.approx(expect, abs=1e-12)

    def test_delta_zero_gives_entropy(self):
        assert rate_hd_smd(PAM6, U6, 70.0) == pytest.approx(math.log2(6), abs=1e-9)


class TestHdBit:
    def test_eps_vanishes_at_high_psnr(self):
        assert hd_bit_stats(PAM6, U6, 60.0) == pytest.approx(0.0, abs=1e-12)

    def test_pam2_closed_form(self):
        c = pam_constellation(2)
        u = InputDistribution.uniform(2)
        psnr = 14.0
        sigma = psnr_to_sigma(psnr)
        assert hd_bit_stats(c, u, psnr) == pytest.approx(Q(0.5 / sigma), rel=1e-9)

    def test_pam6_against_monte_carlo(self):
        mc = mc_rate_stats(PAM6, U6, 25.0, MC_SAMPLES, seed=105)
        est, se = mc["epsilon"]
        assert abs(hd_bit_stats(PAM6, U6, 25.0) - est) < 3 * se

    def test_2d_framed_against_monte_carlo(self):
        c = framed_cross_qam32()
        u = InputDistribution.uniform(32)
        mc = mc_rate_stats(c, u, 25.0, 500_000, seed=106)
        est, se = mc["epsilon"]
        assert abs(hd_bit_stats(c, u, 25.0) - est) < 3 * se

    def test_hd_bmd_exceeds_hd_smd_for_pam6(self):
        # binary Hamming metric keeps part of the Euclidean structure
        for p in (24.0, 25.0, 26.0):
            assert rate_hd_bmd(PAM6, U6, p) > rate_hd_smd(PAM6, U6, p)

    def test_eps_zero_gives_entropy(self):
        assert rate_hd_bmd(PAM6, U6, 70.0) == pytest.approx(math.log2(6), abs=1e-9)


class TestPsnrAtRate:
    def test_self_consistency(self):
        c8 = pam_constellation(8)
        u8 = InputDistribution.uniform(8)
        fn = lambda p: rate_sd_bmd(c8, u8, p)
        p_star = psnr_at_rate(fn, 2.0, (15.0, 30.0))
        assert fn(p_star) == pytest.approx(2.0, abs=1e-5)

    def test_constant_function_rejected(self):
        with pytest.raises(ValueError):
            psnr_at_rate(lambda p: 1.5, 1.5, (10.0, 20.0))

    def test_target_outside_bracket(self):
        with pytest.raises(ValueError):
            psnr_at_rate(lambda p: p / 10.0, 9.9, (10.0, 20.0))


class TestOptimizeSmd:
    def test_pam2_uniform(self):
        c = pam_constellation(2)
        d = optimize_input_smd(c, 10.0, tol=1e-9)
        assert d.probs == pytest.approx((0.5, 0.5), abs=1e-9)

    def test_lower_bound_monotone(self):
        trace = []
        optimize_input_smd(PAM6, 21.0, tol=1e-9, lb_trace=trace)
        assert len(trace) > 3
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_beats_uniform(self):
        for psnr in (19.0, 21.0, 23.0):
            d = optimize_input_smd(PAM6, psnr)
            assert rate_sd_smd(PAM6, d, psnr) >= rate_sd_smd(PAM6, U6, psnr) - 1e-10

    def test_symmetric_result(self):
        d = optimize_input_smd(PAM6, 21.0)
        assert d.probs == pytest.approx(d.probs[::-1], abs=1e-12)

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            optimize_input_smd(PAM6, 21.0, tol=0.0)


class TestOptimizeBmd:
    def test_pam2_uniform(self):
        c = pam_constellation(2)
        assert optimize_input_bmd(c, 10.0).probs == (0.5, 0.5)

    def test_objective_consistency(self):
        d = optimize_input_bmd(PAM6, 21.5, grid_steps=80)
        direct = rate_sd_bmd(PAM6, d, 21.5)
        redo = rate_sd_bmd(PAM6, d, 21.5)
        assert direct == pytest.approx(redo, abs=1e-9)

    def test_beats_uniform(self):
        d = optimize_input_bmd(PAM6, 21.5, grid_steps=80)
        assert rate_sd_bmd(PAM6, d, 21.5) >= rate_sd_bmd(PAM6, U6, 21.5)

    def test_sign_bit_stays_uniform(self):
        d = optimize_input_bmd(PAM6, 22.5, grid_steps=60)
        assert d.probs == pytest.approx(d.probs[::-1], abs=1e-12)


class TestRateCurve:
    def test_tsv_format(self, tmp_path):
        curve = RateCurve(((20.0, 1.5), (21.0, 1.75)), "sd_smd", "6pam", "uniform")
        path = tmp_path / "curve.txt"
        curve.write_tsv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "psnr rate"
        assert lines[1] == "20.000000\t1.500000"

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            RateCurve(((21.0, 1.5), (20.0, 1.6)), "sd_smd", "6pam", "uniform")


@pytest.mark.slow
class TestShapedGaps:
    def test_shaped_bmd_gap_at_1875(self):
        # optimized PAM-6 input vs uniform PAM-8 under soft bit-metric decoding
        c8 = pam_constellation(8)
        u8 = InputDistribution.uniform(8)

        def shaped_rate(p):
            d = optimize_input_bmd(PAM6, p, grid_steps=100)
            return rate_sd_bmd(PAM6, d, p)

        gap = psnr_at_rate(lambda p: rate_sd_bmd(c8, u8, p), 1.875, (15, 30)) - psnr_at_rate(
            shaped_rate, 1.875, (15, 30), tol_bpcu=1e-4
        )
        assert gap == pytest.approx(0.56, abs=0.1)
