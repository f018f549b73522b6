import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierfdr.errors import HierFdrError
from hierfdr.stats import (
    ContingencyTable2x2,
    GroupSummary,
    SelectedIntervalSpec,
    chi_square_2x2,
    fcr_intervals,
    fcr_level,
    normal_cdf,
    normal_quantile,
    replication_outcome,
    t_sf,
    welch_t,
)
from oracles import chi2_2x2_by_hand, normal_cdf_quad, t_sf_quad


class TestNormal:
    def test_center(self):
        assert normal_cdf(0.0) == 0.5

    def test_known_point_against_quadrature(self):
        oracle = normal_cdf_quad(1.959964)
        assert oracle == pytest.approx(0.975, abs=1e-6)
        assert abs(normal_cdf(1.959964) - oracle) <= 1e-12

    @pytest.mark.parametrize("z", np.linspace(-8, 8, 41).tolist())
    def test_symmetry(self, z):
        assert abs(normal_cdf(z) + normal_cdf(-z) - 1.0) <= 1e-12

    def test_grid_accuracy(self):
        for z in np.linspace(-9, 9, 121):
            assert abs(normal_cdf(float(z)) - normal_cdf_quad(float(z))) <= 1e-12

    def test_monotone(self):
        vals = [normal_cdf(float(z)) for z in np.linspace(-8, 8, 2001)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
    def test_non_finite(self, bad):
        with pytest.raises(HierFdrError):
            normal_cdf(bad)

    @pytest.mark.parametrize("p, z", [(0.5, 0.0), (0.975, 1.959964), (0.995, 2.575829)])
    def test_quantile_examples(self, p, z):
        assert normal_quantile(p) == pytest.approx(z, abs=1e-5)
        assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5])
    def test_quantile_domain(self, bad):
        with pytest.raises(HierFdrError):
            normal_quantile(bad)

    def test_roundtrip(self):
        for z in np.linspace(-6, 6, 601):
            assert abs(normal_quantile(normal_cdf(float(z))) - z) <= 1e-8


class TestChiSquare:
    def test_published_table(self):
        table = ContingencyTable2x2(31, 36, 1, 20)
        res = chi_square_2x2(table)
        assert res.statistic == pytest.approx(chi2_2x2_by_hand(31, 36, 1, 20), rel=1e-12)
        assert round(res.statistic, 1) == 11.9
        assert res.df == 1
        # df=1 tail from the quadrature oracle
        assert res.p == pytest.approx(2 * (1 - normal_cdf_quad(math.sqrt(res.statistic))), rel=1e-9)
        assert 5e-4 < res.p < 6e-4

    def test_proportional(self):
        res = chi_square_2x2(ContingencyTable2x2(10, 10, 10, 10))
        assert res.statistic == 0 and res.p == 1.0

    def test_derived(self):
        res = chi_square_2x2(ContingencyTable2x2(20, 10, 10, 20))
        assert chi2_2x2_by_hand(20, 10, 10, 20) == pytest.approx(20 / 3)
        assert res.statistic == pytest.approx(6.6667, abs=1e-3)
        assert res.p == pytest.approx(2 * (1 - normal_cdf_quad(math.sqrt(20 / 3))), rel=1e-9)
        assert res.p == pytest.approx(0.00982, abs=1e-4)

    def test_zero_marginal(self):
        with pytest.raises(HierFdrError):
            chi_square_2x2(ContingencyTable2x2(0, 0, 3, 4))

    def test_bad_cells(self):
        with pytest.raises(HierFdrError):
            ContingencyTable2x2(-1, 2, 3, 4)
        with pytest.raises(HierFdrError):
            ContingencyTable2x2(0, 0, 0, 0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(1, 200), min_size=4, max_size=4))
    def test_symmetries(self, cells):
        a, b, c, d = cells
        base = chi_square_2x2(ContingencyTable2x2(a, b, c, d)).statistic
        for other in [(a, c, b, d), (c, d, a, b), (b, a, d, c), (d, c, b, a)]:
            assert chi_square_2x2(ContingencyTable2x2(*other)).statistic == pytest.approx(base, rel=1e-12)


class TestWelch:
    def test_derived(self):
        res = welch_t(GroupSummary(10, 2, 20), GroupSummary(12, 3, 25))
        se2 = 4 / 20 + 9 / 25
        assert res.t == pytest.approx(-2 / math.sqrt(se2), rel=1e-12)
        assert res.t == pytest.approx(-2.672, abs=1e-3)
        assert res.df == pytest.approx(41.78, abs=0.05)
        assert res.p_two_sided == pytest.approx(2 * t_sf_quad(abs(res.t), res.df), abs=1e-10)

    def test_identical(self):
        g = GroupSummary(5, 1.5, 10)
        res = welch_t(g, g)
        assert res.t == 0 and res.p_two_sided == pytest.approx(1.0)

    def test_pooled_df(self):
        res = welch_t(GroupSummary(1, 2, 15), GroupSummary(3, 2, 15))
        assert res.df == pytest.approx(28)

    def test_antisymmetric(self):
        g1, g2 = GroupSummary(61, 72, 26), GroupSummary(100, 123, 44)
        r1, r2 = welch_t(g1, g2), welch_t(g2, g1)
        assert r1.t == -r2.t and r1.p_two_sided == r2.p_two_sided

    def test_zero_sd(self):
        with pytest.raises(HierFdrError):
            welch_t(GroupSummary(1, 0, 5), GroupSummary(2, 0, 5))

    @pytest.mark.parametrize("t, df", [(0.3, 2.5), (1.95, 53.0), (4.0, 7.0), (-1.0, 12.3)])
    def test_t_tail_against_quadrature(self, t, df):
        assert t_sf(t, df) == pytest.approx(t_sf_quad(t, df), abs=1e-10)


class TestFCR:
    def test_examples(self):
        assert fcr_level(10, 2, 0.05) == pytest.approx(0.99)
        assert fcr_level(7, 7, 0.05) == pytest.approx(0.95)
        assert fcr_level(100, 1, 0.05) == pytest.approx(0.9995)

    def test_monotone(self):
        assert fcr_level(10, 3, 0.05) < fcr_level(10, 2, 0.05)
        assert fcr_level(20, 2, 0.05) > fcr_level(10, 2, 0.05)

    @pytest.mark.parametrize("m, r", [(10, 0), (5, 6)])
    def test_errors(self, m, r):
        with pytest.raises(HierFdrError):
            fcr_level(m, r, 0.05)

    def test_all_selected_is_plain_interval(self):
        (iv,) = fcr_intervals([SelectedIntervalSpec(0.0, 1.0)], 0.05)
        assert iv.upper == pytest.approx(1.959964, abs=1e-4)
        assert iv.lower == pytest.approx(-1.959964, abs=1e-4)

    def test_two_of_ten(self):
        specs = [SelectedIntervalSpec(0.0, 1.0, i < 2) for i in range(10)]
        out = fcr_intervals(specs, 0.05)
        assert [iv.index for iv in out] == [0, 1]
        assert out[0].upper == pytest.approx(2.575829, abs=1e-4)
        assert out[0].level == pytest.approx(0.99)

    def test_none_selected(self):
        with pytest.raises(HierFdrError):
            fcr_intervals([SelectedIntervalSpec(0.0, 1.0, False)], 0.05)


class TestReplicationOutcome:
    def test_examples(self):
        assert replication_outcome(0.03, "positive", 0.04, "positive", 0.05)
        assert not replication_outcome(0.03, "positive", 0.04, "negative", 0.05)
        assert not replication_outcome(0.03, "positive", 0.06, "positive", 0.05)

    def test_none_direction(self):
        with pytest.raises(HierFdrError):
            replication_outcome(0.03, "none", 0.04, "positive", 0.05)
