import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from villagestress.errors import InputError, NumericalError
from villagestress.stats import (SummaryGroup, anova_from_summary, anova_oneway, betainc,
                                 correlation_report, f_tail, pearson_p, pearson_r,
                                 pooled_mean_difference_ci, significance_stars, t_quantile,
                                 t_two_tailed, vif)
from villagestress.classify import StressMatrix


def f_density(x, d1, d2):
    logc = (math.lgamma((d1 + d2) / 2) - math.lgamma(d1 / 2) - math.lgamma(d2 / 2)
            + (d1 / 2) * math.log(d1 / d2))
    return math.exp(logc + (d1 / 2 - 1) * math.log(x) - ((d1 + d2) / 2) * math.log1p(d1 * x / d2))


def f_tail_quadrature(f, d1, d2):
    """Upper tail by integrating the F density directly."""
    if f == 0:
        return 1.0
    # integrate the lower part when it is the smaller piece; the density may be singular at 0
    value, _ = integrate.quad(f_density, f, np.inf, args=(d1, d2), epsabs=1e-13, epsrel=1e-12,
                              limit=200)
    return value


def t_tail_quadrature(t, df):
    logc = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)

    def dens(x):
        return math.exp(logc - (df + 1) / 2 * math.log1p(x * x / df))

    value, _ = integrate.quad(dens, abs(t), np.inf, epsabs=1e-14, epsrel=1e-12)
    return 2 * value


class TestIncompleteBeta:
    @pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2, 3, 0.9), (12.5, 0.5, 0.97),
                                       (1, 1, 0.25), (40, 60, 0.41), (0.7, 9, 0.02)])
    def test_matches_library(self, a, b, x):
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-13)

    def test_endpoints(self):
        assert betainc(2, 3, 0.0) == 0.0
        assert betainc(2, 3, 1.0) == 1.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(InputError):
            betainc(0, 1, 0.5)
        with pytest.raises(InputError):
            betainc(1, 1, 1.5)


class TestFTail:
    def test_zero(self):
        assert f_tail(0.0, 3, 10) == 1.0

    def test_admin_sgi_probability(self):
        assert f_tail(4.385, 1, 25) == pytest.approx(0.0466, abs=5e-4)

    def test_spatial_aii_probability(self):
        assert f_tail(7.97, 3, 23) == pytest.approx(0.0008, abs=5e-5)

    @pytest.mark.parametrize("f,d1,d2", [(4.385, 1, 25), (0.3, 2, 7), (12.0, 5, 3),
                                         (1.0, 1, 1), (2.5, 10, 40)])
    def test_quadrature_oracle(self, f, d1, d2):
        assert f_tail(f, d1, d2) == pytest.approx(f_tail_quadrature(f, d1, d2), abs=1e-9)

    def test_infinite_statistic(self):
        assert f_tail(math.inf, 2, 5) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(InputError):
            f_tail(-1.0, 1, 2)

    @given(st.floats(0, 50), st.floats(0, 50), st.integers(1, 30), st.integers(1, 60))
    def test_monotone_decreasing(self, f1, f2, d1, d2):
        lo, hi = sorted((f1, f2))
        assert f_tail(hi, d1, d2) <= f_tail(lo, d1, d2) + 1e-15

    @given(st.floats(-20, 20), st.integers(1, 80))
    def test_f_t_consistency(self, t, df):
        assert f_tail(t * t, 1, df) == pytest.approx(t_two_tailed(t, df), abs=1e-14)


class TestPearson:
    def test_identity(self):
        x = [1.0, 4.0, 2.0, 8.0]
        assert pearson_r(x, x) == pytest.approx(1.0, abs=1e-15)

    def test_affine_anticorrelation(self):
        x = np.array([1.0, 4.0, 2.0, 8.0, 3.0])
        assert pearson_r(x, -2 * x + 7) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_value(self):
        # covariance quotient by hand: 9.5 / sqrt(8.75 * 11)
        assert pearson_r([1, 2, 3, 5], [2, 2, 4, 6]) == pytest.approx(0.9683296637314885, abs=1e-15)

    def test_zero_variance(self):
        with pytest.raises(InputError, match="zero variance"):
            pearson_r([1, 1, 1], [1, 2, 3])

    def test_p_of_zero(self):
        assert pearson_p(0.0, 12) == pytest.approx(1.0, abs=1e-15)

    def test_p_sgi_srei(self):
        assert 0.0012 <= pearson_p(-0.5816, 27) <= 0.0018

    def test_p_quadrature(self):
        r, n = 0.9, 5
        t = r * math.sqrt((n - 2) / (1 - r * r))
        assert pearson_p(r, n) == pytest.approx(t_tail_quadrature(t, n - 2), abs=1e-10)

    def test_p_of_perfect_correlation(self):
        assert pearson_p(1.0, 10) == 0.0
        assert pearson_p(-1.0, 10) == 0.0


class TestVif:
    def test_orthogonal_columns(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(12, 4))
        # Q spans the centred columns, so it stays centred and orthogonal
        x, _ = np.linalg.qr(x - x.mean(axis=0))
        assert vif(x) == pytest.approx(np.ones(4), abs=1e-9)

    def test_duplicate_column(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(15, 3))
        x = np.column_stack([x, x[:, 0]])
        out = vif(x)
        assert math.isinf(out[0]) and math.isinf(out[3])
        assert np.isfinite(out[1:3]).all()

    def test_pseudoinverse_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(20, 3))
        x[:, 2] += 0.8 * x[:, 0]
        expected = []
        for j in range(3):
            a = np.column_stack([np.ones(20), np.delete(x, j, axis=1)])
            fitted = a @ (np.linalg.pinv(a) @ x[:, j])
            yc = x[:, j] - x[:, j].mean()
            r2 = 1 - ((x[:, j] - fitted) ** 2).sum() / (yc @ yc)
            expected.append(1 / (1 - r2))
        assert vif(x) == pytest.approx(expected, rel=1e-8)

    def test_row_permutation(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(10, 4))
        assert vif(x[rng.permutation(10)]) == pytest.approx(vif(x), rel=1e-10)

    def test_too_few_rows(self):
        with pytest.raises(InputError):
            vif(np.ones((3, 4)))


class TestAnova:
    def test_hand_sums_of_squares(self):
        # SS_between = 2 * 3 * 1.5^2 = 13.5, SS_within = 4, df (1, 4)
        res = anova_oneway([[1, 2, 3], [4, 5, 6]])
        assert res.f == pytest.approx(13.5, rel=1e-14)
        assert (res.df_between, res.df_within) == (1, 4)
        assert res.p == pytest.approx(f_tail_quadrature(13.5, 1, 4), abs=1e-10)

    def test_degenerate(self):
        with pytest.raises(NumericalError, match="zero within and between variance"):
            anova_oneway([[2.0, 2.0], [2.0, 2.0, 2.0]])

    def test_zero_within_but_different_means(self):
        res = anova_oneway([[1.0, 1.0], [3.0, 3.0]])
        assert math.isinf(res.f) and res.p == 0.0

    def test_equal_means(self):
        res = anova_oneway([[1.0, 3.0], [0.0, 2.0, 4.0]])
        assert res.f == pytest.approx(0.0, abs=1e-15)
        assert res.p == pytest.approx(1.0)

    def test_summary_admin_sgi(self):
        res = anova_from_summary([SummaryGroup("ADV", 15, 0.450, 0.311),
                                  SummaryGroup("SCV", 12, 0.242, 0.165)])
        assert res.f == pytest.approx(4.385, rel=0.03)

    def test_summary_spatial_aii(self):
        groups = [SummaryGroup(str(i), n, m, s) for i, (n, m, s) in
                  enumerate([(4, .158, .045), (7, .463, .108), (3, .324, .062), (13, .292, .117)])]
        res = anova_from_summary(groups)
        assert res.f == pytest.approx(7.97, rel=0.03)
        assert (res.df_between, res.df_within) == (3, 23)

    def test_summary_identical_means(self):
        res = anova_from_summary([SummaryGroup("a", 3, 0.5, 0.1), SummaryGroup("b", 4, 0.5, 0.2)])
        assert res.f == 0.0

    def test_summary_rejects_empty_group(self):
        with pytest.raises(InputError):
            anova_from_summary([SummaryGroup("a", 0, 0.5, 0.1), SummaryGroup("b", 4, 0.5, 0.2)])

    def test_needs_two_groups(self):
        with pytest.raises(InputError):
            anova_oneway([[1.0, 2.0, 3.0]])

    @settings(max_examples=200)
    @given(st.lists(st.lists(st.floats(-100, 100), min_size=2, max_size=9),
                    min_size=2, max_size=5))
    def test_summary_equals_raw(self, groups):
        raw = [np.array(g) for g in groups]
        ss_w = sum(((g - g.mean()) ** 2).sum() for g in raw)
        means = [g.mean() for g in raw]
        if ss_w < 1e-9 or np.ptp(means) < 1e-9:
            return
        a = anova_oneway(raw)
        b = anova_from_summary([SummaryGroup.from_sample(str(i), g) for i, g in enumerate(raw)])
        assert b.f == pytest.approx(a.f, rel=1e-9)
        assert (b.df_between, b.df_within) == (a.df_between, a.df_within)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=10),
           st.lists(st.floats(-50, 50), min_size=2, max_size=10))
    def test_two_groups_equal_squared_pooled_t(self, g1, g2):
        a, b = np.array(g1), np.array(g2)
        n1, n2 = a.size, b.size
        sp2 = (((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()) / (n1 + n2 - 2)
        if sp2 < 1e-9 or abs(a.mean() - b.mean()) < 1e-9:
            return
        t = (a.mean() - b.mean()) / math.sqrt(sp2 * (1 / n1 + 1 / n2))
        assert anova_oneway([a, b]).f == pytest.approx(t * t, rel=1e-9)


class TestConfidenceInterval:
    def test_t_quantile(self):
        assert t_quantile(0.975, 25) == pytest.approx(2.059538552753294, abs=1e-10)
        assert t_quantile(0.025, 25) == pytest.approx(-2.059538552753294, abs=1e-10)

    def test_admin_intervals_contain_difference_and_match_sign(self):
        # reference intervals: SGI [0.016, 0.400], WI [-0.142, -0.014]
        sgi = pooled_mean_difference_ci(SummaryGroup("ADV", 15, .450, .311),
                                        SummaryGroup("SCV", 12, .242, .165))
        wi = pooled_mean_difference_ci(SummaryGroup("ADV", 15, .595, .067),
                                       SummaryGroup("SCV", 12, .673, .090))
        assert sgi[0] < 0.208 < sgi[1] and sgi[0] > 0
        assert wi[0] < -0.078 < wi[1] and wi[1] < 0


def test_stars():
    assert [significance_stars(p) for p in (0.2, 0.04, 0.005, 0.0004)] == ["", "*", "**", "***"]


class TestCorrelationReport:
    def test_orthogonal_fixture_flags_nothing(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(20, 4))
        q, _ = np.linalg.qr(x - x.mean(axis=0))
        m = StressMatrix([f"v{i}" for i in range(20)], q)
        rep = correlation_report(m)
        assert rep.flagged == ()
        assert np.allclose(rep.r_matrix, np.eye(4), atol=1e-9)
        assert np.allclose(np.diag(rep.r_matrix), 1.0)

    def test_two_villages(self):
        m = StressMatrix(["a", "b"], [[0.1, 0.2, 0.5, 0.3], [0.2, 0.1, 0.6, 0.1]])
        with pytest.raises(InputError):
            correlation_report(m)

    def test_report_shape(self):
        rng = np.random.default_rng(9)
        m = StressMatrix([f"v{i}" for i in range(12)], rng.random((12, 4)))
        rep = correlation_report(m)
        assert np.allclose(rep.r_matrix, rep.r_matrix.T)
        assert (np.abs(rep.r_matrix) <= 1).all()
        assert np.linalg.eigvalsh(rep.r_matrix).min() > -1e-12
        assert (rep.vif >= 1).all()
        assert len(list(rep.pairs())) == 6
