import json

import numpy as np
import pytest

from frailmix.analysis import (
    CurveTable,
    bic,
    compare_models,
    default_grid,
    likelihood_ratio_test,
    survival_curves,
    wald_table,
)
from frailmix.errors import DomainError
from frailmix.params import CSL_2019_ESTIMATES, CSL_2019_STANDARD_ERRORS, FrailtySpec

# bold rows of the reference table
REFERENCE_SIGNIFICANT = {
    "theta_w", "lambda1", "gamma1", "beta2", "beta3", "lambda2", "gamma2", "alpha0", "alpha2", "alpha4", "alpha5",
}
# frozen from mpmath: 200 + 3 ln 50 and the chi-square(1) tail at 20
BIC_EXAMPLE = 211.73606901628444
CHI2_TAIL_20 = 7.744216431044084e-06


class TestWald:
    def test_home_effect(self):
        (row,) = wald_table({"beta2": 0.172}, {"beta2": 0.082})
        assert row.z == pytest.approx(2.098, abs=5e-4) and row.significant

    def test_first_half_effect(self):
        (row,) = wald_table({"beta1": -0.024}, {"beta1": 0.066})
        assert abs(row.z) == pytest.approx(0.364, abs=5e-4) and not row.significant

    def test_zero_estimate(self):
        (row,) = wald_table({"x": 0.0}, {"x": 3.0})
        assert row.z == 0 and row.p_value == 1.0

    def test_reference_pattern(self):
        rows = wald_table(CSL_2019_ESTIMATES, CSL_2019_STANDARD_ERRORS, 0.05)
        assert {r.name for r in rows if r.significant} == REFERENCE_SIGNIFICANT

    @pytest.mark.parametrize("se", [0.0, float("nan")])
    def test_bad_se(self, se):
        with pytest.raises(DomainError):
            wald_table({"x": 1.0}, {"x": se})


class TestLRT:
    def test_reference_values(self):
        lam, p = likelihood_ratio_test(-5407.3788, -5386.6376, 1)
        assert lam == pytest.approx(41.4824, abs=1e-3) and p < 1e-4

    def test_equal(self):
        assert likelihood_ratio_test(-10.0, -10.0) == (0.0, 1.0)

    def test_chi2_tail(self):
        lam, p = likelihood_ratio_test(-100, -90, 1)
        assert lam == 20 and p == pytest.approx(CHI2_TAIL_20, rel=1e-9)

    def test_negative_beyond_slack(self):
        with pytest.raises(DomainError, match="not nested"):
            likelihood_ratio_test(-90, -100)

    def test_negative_within_slack_clamps(self):
        assert likelihood_ratio_test(-10.0, -10.0 - 1e-7)[0] == 0.0

    def test_permutation_invariant(self):
        a = compare_models(-100.0, -95.0, 15, 16, 300)
        b = compare_models(-100.0, -95.0, 15, 16, 300)
        assert a == b


class TestBIC:
    def test_zero(self):
        assert bic(0, 0, 1) == 0

    def test_example(self):
        assert bic(-100, 3, 50) == pytest.approx(BIC_EXAMPLE, rel=1e-12)

    def test_bad_n(self):
        with pytest.raises(DomainError):
            bic(0, 1, 0)


class TestCompare:
    def test_reference(self):
        r = compare_models(-5407.3788, -5386.6376, 15, 16, 2314)
        assert r.preferred == "gamma-frailty" and r.df == 1 and r.p_value < 1e-4
        assert "boundary" in r.notes[0]
        json.dumps(r.to_dict())
        assert "< 0.0001" in r.to_text()

    def test_identical_prefers_simpler(self):
        r = compare_models(-50.0, -50.0, 15, 16, 100)
        assert r.lambda_stat == 0 and r.preferred == "independence"

    def test_not_nested(self):
        with pytest.raises(DomainError):
            compare_models(-50.0, -49.0, 16, 16, 100)


class TestCurves:
    def test_fig1_columns(self, table1):
        t = survival_curves(table1, "fig1")
        assert list(t.columns) == ["S1", "S2"]
        i = int(np.flatnonzero(np.isclose(t.t_grid, 1.5))[0])
        assert t.columns["S2"][i] == pytest.approx(9.388484077099399e-08, rel=1e-9)
        assert t.columns["S1"][i] > 0.9

    def test_grid(self):
        g = default_grid()
        assert g[0] == 0 and g[-1] == 90 and np.isclose(g[1], 0.01) and np.all(np.diff(g) > 0)

    def test_fig2_home_below_away(self, table1):
        t = survival_curves(table1, "fig2", n_frailty_draws=50, rng=1)
        assert len(t.columns) == 102
        assert np.all(t.columns["home_w1"] <= t.columns["away_w1"])
        assert np.any(t.columns["home_w1"] < t.columns["away_w1"])

    def test_fig2_seeded(self, table1):
        a = survival_curves(table1, "fig2", 5, rng=3)
        b = survival_curves(table1, "fig2", 5, rng=3)
        np.testing.assert_array_equal(a.columns["home_w05"], b.columns["home_w05"])

    def test_fig3(self, table1):
        old = table1.with_frailty(FrailtySpec.degenerate())
        t = survival_curves(table1, "fig3", old_params=old)
        np.testing.assert_array_equal(t.columns["S1_old"], t.columns["S1_new"])
        with pytest.raises(DomainError):
            survival_curves(table1, "fig3")

    @pytest.mark.parametrize("fig", ["fig1", "fig2", "fig3"])
    def test_every_column_is_a_survival_curve(self, table1, fig):
        t = survival_curves(table1, fig, 10, old_params=table1, rng=0)
        for col in t.columns.values():
            assert col[0] == 1.0 and np.all(np.diff(col) <= 0)

    def test_rejects_non_survival(self):
        with pytest.raises(DomainError):
            CurveTable(np.array([0.0, 1.0]), {"x": np.array([1.0, 1.2])})

    def test_csv(self, table1, tmp_path):
        path = tmp_path / "c.csv"
        survival_curves(table1, "fig1", t_grid=np.array([0.0, 1.0, 2.0])).to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,S1,S2" and lines[1] == "0,1,1" and len(lines) == 4

    def test_unknown_figure(self, table1):
        with pytest.raises(DomainError):
            survival_curves(table1, "fig9")
