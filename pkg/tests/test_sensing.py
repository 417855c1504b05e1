import logging
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sp_special
from scipy import stats

from netzero_isac.fading import FadingSpec, product_tail
from netzero_isac.link import Geometry, SystemParams
from netzero_isac.numerics import ConvergenceError, SeriesTruncation, bessel_k
from netzero_isac.scenario import Scenario
from netzero_isac.sensing import (
    DetectionQuery,
    LocalizationQuery,
    antenna_probabilities,
    detect_prob_rayleigh,
    detect_prob_rician,
    detection_probability,
    localization_prob,
    localization_prob_enumerated,
    poisson_binomial_pmf,
    rayleigh_f,
    rician_series,
    sensing_sweep,
    theorem1_check,
)

RAY = FadingSpec.rayleigh()


def query(ratio, kf=0.0, kb=0.0, sf=1.0, sb=1.0):
    return DetectionQuery(1.0, ratio, FadingSpec.rician(kf, sf), FadingSpec.rician(kb, sb))


def scenario(**changes):
    base = Scenario(SystemParams(p_s=1.0, ref_loss=1e4, p_th=10 ** -10.5),
                    Geometry(2.0, (2.0, 3.0, 4.0, 5.0)), gamma_sq=0.5)
    return base.with_(**changes)


class TestRayleigh:
    def test_tiny_threshold(self):
        assert detect_prob_rayleigh(query(1e-14)) == pytest.approx(1.0, abs=1e-10)

    def test_unit_ratio_is_k1(self):
        assert detect_prob_rayleigh(query(1.0)) == pytest.approx(0.60190723, abs=1e-8)
        assert detect_prob_rayleigh(query(1.0), "meijer") == pytest.approx(bessel_k(1, 1.0), abs=1e-10)

    def test_scatter_scale(self):
        # threshold c on the envelope product, closed form (c/s) K1(c/s)
        c, sf, sb = 1.7, 0.6, 1.4
        w = c / (sf * sb)
        assert detect_prob_rayleigh(query(c * c, sf=sf, sb=sb)) == pytest.approx(w * bessel_k(1, w), rel=1e-12)

    def test_rejects_rician(self):
        with pytest.raises(ValueError):
            detect_prob_rayleigh(query(1.0, kf=1.0))

    @given(st.floats(1e-6, 1e3), st.floats(1.001, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_strictly_decreasing(self, ratio, factor):
        lo, hi = detect_prob_rayleigh(query(ratio)), detect_prob_rayleigh(query(ratio * factor))
        assert 0.0 <= hi < lo <= 1.0


class TestRician:
    def test_zero_k_equals_rayleigh(self):
        for ratio in (0.01, 1.0, 9.0):
            assert detect_prob_rician(query(ratio)) == pytest.approx(detect_prob_rayleigh(query(ratio)), abs=1e-10)

    def test_small_k_limit(self):
        for ratio in (0.1, 1.0, 5.0):
            assert detect_prob_rician(query(ratio, 1e-6, 1e-6)) == pytest.approx(
                detect_prob_rayleigh(query(ratio)), abs=1e-5)

    def test_fading_symmetry(self):
        for ratio in (0.05, 0.5, 2.0, 20.0):
            a = detect_prob_rician(query(ratio, 1.0, 0.0))
            b = detect_prob_rician(query(ratio, 0.0, 1.0))
            assert abs(a - b) < 1e-12

    def test_unit_k_against_oracle(self):
        q = query(2.5, 1.0, 1.0)
        assert detect_prob_rician(q) == pytest.approx(product_tail(math.sqrt(2.5), q.forward, q.back), abs=1e-4)

    @pytest.mark.parametrize("kf,kb", [(0.5, 2.0), (5.0, 1.0), (2.0, 2.0)])
    def test_meijer_and_bessel_terms_agree(self, kf, kb):
        q = query(3.0, kf, kb, 0.8, 1.2)
        assert rician_series(q, method="meijer").value == pytest.approx(rician_series(q).value, abs=1e-9)

    def test_unequal_scatter_against_oracle(self):
        q = query(1.3, 2.0, 0.5, 0.7, 1.5)
        assert detect_prob_rician(q) == pytest.approx(product_tail(math.sqrt(1.3), q.forward, q.back), abs=1e-6)

    def test_large_k_raises_with_partial_sum(self):
        q = query(50.0, 50.0, 50.0, 0.1, 0.1)
        with pytest.raises(ConvergenceError) as info:
            detect_prob_rician(q)
        assert math.isfinite(info.value.estimate)
        assert info.value.residual > 0

    def test_fallback_to_oracle(self, caplog):
        q = query(2.0, 50.0, 50.0, 0.1, 0.1)
        with caplog.at_level(logging.WARNING):
            p = detection_probability(q)
        assert p == pytest.approx(product_tail(math.sqrt(2.0), q.forward, q.back), abs=1e-12)
        assert "quadrature oracle" in caplog.text
        with pytest.raises(ConvergenceError):
            detection_probability(q, fallback=False)

    def test_truncation_cap_respected(self):
        res = rician_series(query(1.0, 2.0, 2.0), SeriesTruncation(40, 1e-10))
        assert res.residual < 1e-10
        assert res.diagonals <= 2 * 40 - 1


class TestLocalization:
    def test_all_certain(self):
        assert localization_prob([1.0, 1.0, 1.0]) == 1.0

    @pytest.mark.parametrize("n,p", [(3, 0.4), (4, 0.7), (8, 0.25)])
    def test_binomial_reduction(self, n, p):
        expected = 1.0 - sum(math.comb(n, k) * p ** k * (1 - p) ** (n - k) for k in range(3))
        assert localization_prob([p] * n) == pytest.approx(expected, abs=1e-14)
        assert localization_prob([p] * n) == pytest.approx(stats.binom.sf(2, n, p), abs=1e-14)

    def test_heterogeneous(self):
        p = (0.9, 0.8, 0.3, 0.3)
        # exactly-3 patterns and the all-4 pattern written out by hand
        by_hand = (0.9 * 0.8 * 0.3 * 0.7 * 2 + 0.9 * 0.2 * 0.3 * 0.3 + 0.1 * 0.8 * 0.3 * 0.3
                   + 0.9 * 0.8 * 0.3 * 0.3)
        assert localization_prob(p) == pytest.approx(by_hand, abs=1e-15)
        assert localization_prob(p) == pytest.approx(localization_prob_enumerated(p), abs=1e-15)

    @given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=10), st.integers(1, 3))
    @settings(max_examples=150, deadline=None)
    def test_recursion_equals_enumeration(self, p, required):
        assert abs(localization_prob(p, required) - localization_prob_enumerated(p, required)) < 1e-12

    @given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=8), st.data())
    @settings(max_examples=100, deadline=None)
    def test_nondecreasing_in_each_probability(self, p, data):
        i = data.draw(st.integers(0, len(p) - 1))
        bumped = list(p)
        bumped[i] = data.draw(st.floats(p[i], 1.0))
        assert localization_prob(bumped) >= localization_prob(p) - 1e-15

    def test_pmf_sums_to_one(self):
        pmf = poisson_binomial_pmf([0.1, 0.5, 0.9, 0.33])
        assert pmf.sum() == pytest.approx(1.0, abs=1e-15)
        assert len(pmf) == 5

    def test_query_validation(self):
        with pytest.raises(ValueError):
            LocalizationQuery((0.5, 0.5))
        with pytest.raises(ValueError):
            LocalizationQuery((0.5, 1.5, 0.2))


class TestRayleighTailMonotone:
    def test_coarse_grid_decreasing(self):
        rep = theorem1_check([0.01, 0.1, 1.0, 10.0])
        assert rep.decreasing and rep.ok

    def test_derivative_at_one(self):
        h = 1e-5
        deriv = (rayleigh_f(1 + h) - rayleigh_f(1 - h)) / (2 * h)
        # -2 K0(2) = -0.2277877...
        assert deriv == pytest.approx(-2 * sp_special.k0(2.0), rel=1e-6)

    def test_zero_limit(self):
        assert rayleigh_f(1e-12) == pytest.approx(1.0, abs=1e-9)

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ValueError):
            theorem1_check([1.0, 0.5])


class TestScenarioSweeps:
    def test_more_power_more_detection(self):
        grid = [0.1, 0.3, 1.0, 3.0, 10.0]
        res = sensing_sweep(scenario(), "p_s", grid)
        for i in range(4):
            vals = res.values(series=f"antenna_{i}", metric="p_i")
            assert all(b >= a for a, b in zip(vals, vals[1:]))
        ploc = res.values(metric="p_loc")
        assert all(b >= a for a, b in zip(ploc, ploc[1:]))

    def test_distance_lowers_detection(self):
        res = sensing_sweep(scenario(), "d_b[0]", [2.0, 3.0, 5.0, 8.0])
        vals = res.values(series="antenna_0", metric="p_i")
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_no_reflection_no_detection(self):
        assert antenna_probabilities(scenario(gamma_sq=0.0)) == [0.0] * 4

    def test_workers_do_not_change_rows(self):
        grid = [0.2, 0.5, 1.0]
        a = sensing_sweep(scenario(), "gamma_sq", grid)
        b = sensing_sweep(scenario(), "gamma_sq", grid, workers=3)
        assert a.to_csv() == b.to_csv()
