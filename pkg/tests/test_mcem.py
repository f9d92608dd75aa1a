import numpy as np
import pytest
from conftest import random_cluster, random_params

from frailmix.data import Dataset, IntervalObservation, make_cluster
from frailmix.errors import DomainError, InformationError
from frailmix.frailty import sample_gamma_posterior, suff_stats
from frailmix.latent import DrawSet
from frailmix.likelihood import interval_terms, marginal_gamma_loglik
from frailmix.mcem import (
    ClusterStreams,
    MCEMConfig,
    QFunction,
    _eta_logodds,
    default_init,
    eta_probability,
    initial_eta,
    louis_information,
    m_step,
    mce_step,
    mce_step_gamma,
    mce_step_general,
    numerical_gradient,
    numerical_hessian,
    run_mcem,
    standard_errors,
)
from frailmix.params import (
    FrailtySpec,
    MixtureParams,
    ModelParams,
    from_internal,
    to_internal,
)
from frailmix.simulate import SimConfig, simulate_dataset

# frozen from an mpmath evaluation at 40 digits
ETA_PROB_OBSERVED_0_3 = 0.19369060760935268


class TestEtaProbability:
    def test_censored_long_gap(self, table1):
        iv = IntervalObservation(2.0, 0, 1, (0.0,) * 5)
        assert eta_probability(iv, 1.0, table1) == pytest.approx(1.0, abs=1e-15)

    def test_observed_short_gap(self, table1):
        iv = IntervalObservation(0.3, 1, 1, (0.0,) * 5)
        assert eta_probability(iv, 1.0, table1) == pytest.approx(ETA_PROB_OBSERVED_0_3, rel=1e-10)

    def test_pi_one(self, table1):
        params = ModelParams(table1.frailty, table1.t1, table1.t2, MixtureParams(800.0, (0.0,) * 5))
        for y in (0.01, 0.5, 30.0):
            assert eta_probability(IntervalObservation(y, 1, 1, (0.0,) * 5), 1.0, params) == 1.0

    def test_type1_rejected(self, table1):
        with pytest.raises(DomainError):
            eta_probability(IntervalObservation(1.0, 1, 0, (0.0,) * 5), 1.0, table1)

    def test_vectorised_log_odds_agree(self, sim_small, table1):
        ds = sim_small[0]
        arr = ds.arrays
        terms = interval_terms(arr, table1)
        w = 1.7
        lo = _eta_logodds(terms, arr, slice(0, arr.n_type2), np.array([[w]]))[0]
        ivs = [iv for c in ds.clusters for iv in c.intervals if iv.delta_prev == 1]
        expected = [eta_probability(iv, w, table1) for iv in ivs]
        np.testing.assert_allclose(1 / (1 + np.exp(-lo)), expected, rtol=1e-10)


class TestEStep:
    def test_degenerate_returns_unit_frailty(self, sim_small, table1):
        ds = sim_small[0]
        params = table1.with_frailty(FrailtySpec.degenerate())
        draws = mce_step_general(ds, params, None, 4, 0)
        np.testing.assert_array_equal(draws.w, 1.0)
        ref = mce_step(ds, params, None, 4, ClusterStreams(0), 0)
        np.testing.assert_array_equal(draws.eta, ref.eta)

    def test_no_type2_intervals(self, table1):
        ds = Dataset(tuple(make_cluster(f"T{i}", "G", [(5.0, 0, (0.0,) * 5)]) for i in range(3)), 5)
        lognormal = table1.with_frailty(FrailtySpec.lognormal(0.5))
        draws = mce_step_general(ds, lognormal, DrawSet(np.zeros((1, 0), np.int8)), 6, 1)
        assert draws.eta.shape == (6, 0) and draws.w.shape == (6, 3)

    def test_reproducible(self, sim_small, table1):
        ds = sim_small[0]
        a = mce_step_gamma(ds, table1, 1, 42)
        b = mce_step_gamma(ds, table1, 1, 42)
        np.testing.assert_array_equal(a.eta, b.eta)
        c = mce_step_gamma(ds, table1, 1, 43)
        assert not np.array_equal(a.eta, c.eta)

    def test_threads_do_not_change_draws(self, sim_small, table1):
        ds = sim_small[0]
        prev = initial_eta(ds, table1, 8, 1)
        a = mce_step_gamma(ds, table1, 8, 3, prev)
        b = mce_step_gamma(ds, table1, 8, 3, prev, threads=4)
        np.testing.assert_array_equal(a.eta, b.eta)

    def test_gamma_step_keeps_no_frailty(self, sim_small, table1):
        assert mce_step_gamma(sim_small[0], table1, 3, 0).w is None

    def test_tiny_theta_matches_independence_probabilities(self, sim_small, table1):
        ds = sim_small[0]
        rng = np.random.default_rng(0)
        params = table1.with_frailty(FrailtySpec.gamma(1e-8))
        it = iter(sim_small[1].eta)
        gaps = []
        for cluster in ds.clusters:
            n2 = sum(iv.delta_prev for iv in cluster.intervals)
            eta = [next(it) for _ in range(n2)]
            w = sample_gamma_posterior(suff_stats(cluster, eta, params.t1), 1e-8, rng)
            for iv in cluster.intervals:
                if iv.delta_prev:
                    gaps.append(abs(eta_probability(iv, w, params) - eta_probability(iv, 1.0, params)))
        assert np.max(gaps) < 1e-4

    def test_gamma_requires_gamma(self, sim_small, table1):
        with pytest.raises(DomainError):
            mce_step_gamma(sim_small[0], table1.with_frailty(FrailtySpec.lognormal(0.3)), 2, 0)


@pytest.fixture(scope="module")
def desk():
    rng = np.random.default_rng(21)
    params = random_params(rng, "gamma", p=2)
    ds = Dataset(tuple(random_cluster(rng, i, max_len=8) for i in range(40)), 2)
    return ds, params


class TestQFunction:
    @pytest.mark.parametrize("family", ["gamma", "lognormal", "degenerate"])
    def test_value_is_mean_of_per_draw(self, desk, family):
        ds, params = desk
        params = params.with_frailty({
            "gamma": FrailtySpec.gamma(0.4), "lognormal": FrailtySpec.lognormal(0.5),
            "degenerate": FrailtySpec.degenerate()}[family])
        draws = mce_step(ds, params, initial_eta(ds, params, 30, 0), 30, ClusterStreams(1), 0)
        Q = QFunction(ds, draws, family, 2)
        u = to_internal(params)
        assert Q.value(u) == pytest.approx(Q.per_draw(u).mean(), rel=1e-12)

    def test_complete_gamma_draws(self, desk):
        ds, params = desk
        draws = mce_step_general(ds, params, initial_eta(ds, params, 20, 0), 20, 2)
        Q = QFunction(ds, draws, "gamma", 2)
        assert Q.kind == "complete"
        u = to_internal(params)
        assert Q.value(u) == pytest.approx(Q.per_draw(u).mean(), rel=1e-12)

    def test_reduction_to_independence(self, desk):
        ds, params = desk
        draws = mce_step(ds, params.with_frailty(FrailtySpec.degenerate()), None, 50, ClusterStreams(4), 0)
        qg = QFunction(ds, draws, "gamma", 2).value(to_internal(params.with_frailty(FrailtySpec.gamma(1e-6))))
        qi = QFunction(ds, draws, "degenerate", 2).value(to_internal(params.with_frailty(FrailtySpec.degenerate())))
        assert abs(qg - qi) < 1e-2

    def test_fd_gradient_hygiene(self, desk):
        ds, params = desk
        rng = np.random.default_rng(5)
        eta = rng.integers(0, 2, ds.arrays.n_type2)
        for _ in range(3):
            p = random_params(rng, "gamma", p=2)
            u = to_internal(p)

            def f(v):
                return marginal_gamma_loglik(ds, eta, from_internal(v, "gamma", 2))

            g1 = numerical_gradient(f, u)
            g2 = numerical_gradient(f, u, h=1e-5 * np.maximum(1, np.abs(u)))
            np.testing.assert_allclose(g1, g2, rtol=1e-4, atol=1e-6 * np.abs(g2).max())


@pytest.fixture(scope="module")
def fitted(table1):
    ds, _ = simulate_dataset(SimConfig(table1, 25, seed=8))
    start = default_init(ds, "gamma-frailty")
    draws = mce_step_gamma(ds, table1, 200, 0)
    theta, q = m_step(ds, draws, "gamma-frailty", start)
    return ds, draws, start, theta, q


class TestMStep:

    def test_ascent(self, fitted):
        ds, draws, start, theta, q = fitted
        Q = QFunction(ds, draws, "gamma", 5)
        assert q >= Q.value(to_internal(start)) - 1e-6
        assert q == pytest.approx(Q.value(to_internal(theta)))

    def test_stationary(self, fitted):
        ds, draws, _, theta, _ = fitted
        Q = QFunction(ds, draws, "gamma", 5)
        g = numerical_gradient(Q.value, to_internal(theta))
        assert np.linalg.norm(g) < 1e-5 * max(1.0, abs(Q.value(to_internal(theta))))

    def test_restart_from_optimum_stays(self, fitted):
        ds, draws, _, theta, q = fitted
        theta2, q2 = m_step(ds, draws, "gamma-frailty", theta)
        assert q2 >= q - 1e-6

    def test_empty_draws(self, fitted):
        ds, _, start, _, _ = fitted
        with pytest.raises(DomainError):
            m_step(ds, DrawSet(np.zeros((0, ds.arrays.n_type2), np.int8)), "gamma-frailty", start)

    def test_family_mismatch(self, fitted):
        ds, draws, start, _, _ = fitted
        with pytest.raises(DomainError):
            m_step(ds, draws, "independence", start)


class TestRunMCEM:
    def test_infinite_tol_stops_after_window(self, sim_small):
        cfg = MCEMConfig(M0=5, M_max=5, tol=np.inf, window=3, M_final=5, seed=1)
        fit = run_mcem(sim_small[0], None, cfg, "independence", compute_se=False)
        assert fit.n_iter == 4 and fit.converged
        assert len(fit.theta_trace) == len(fit.q_trace) == 4

    def test_deterministic(self, sim_small):
        cfg = MCEMConfig(M0=5, M_max=10, max_iter=4, M_final=10, seed=3)
        a = run_mcem(sim_small[0], None, cfg, "gamma-frailty", compute_se=False)
        b = run_mcem(sim_small[0], None, cfg, "gamma-frailty", compute_se=False)
        assert a.q_trace == b.q_trace
        np.testing.assert_array_equal(np.array(a.theta_trace), np.array(b.theta_trace))
        np.testing.assert_array_equal(a.final_draws.eta, b.final_draws.eta)

    def test_max_iter_is_not_an_exception(self, sim_small):
        cfg = MCEMConfig(M0=5, M_max=5, max_iter=2, tol=1e-12, M_final=5)
        fit = run_mcem(sim_small[0], None, cfg, "gamma-frailty", compute_se=False)
        assert not fit.converged and fit.n_iter == 2 and fit.notes

    def test_boundary_reported_as_non_convergence(self):
        ds = Dataset((make_cluster("A", "G", [(30.0, 0, ())]),), 0)
        cfg = MCEMConfig(M0=1, M_max=1, M_final=2, max_iter=10, tol=1e-3)
        fit = run_mcem(ds, None, cfg, "independence")
        assert not fit.converged
        assert any("not positive definite" in n or "boundary" in n for n in fit.notes)

    def test_lognormal_runs(self, sim_small):
        cfg = MCEMConfig(M0=5, M_max=5, max_iter=2, M_final=10, seed=2)
        fit = run_mcem(sim_small[0], None, cfg, "lognormal-frailty", compute_se=False)
        assert fit.final_draws.w.shape == (10, len(sim_small[0].clusters))

    def test_init_mismatch(self, sim_small, table1):
        with pytest.raises(DomainError):
            run_mcem(sim_small[0], table1, MCEMConfig(), "independence")


class TestLouis:
    def test_single_complete_draw_is_negative_hessian(self, desk):
        ds, params = desk
        params = params.with_frailty(FrailtySpec.lognormal(0.5))
        draws = mce_step_general(ds, params, initial_eta(ds, params, 1, 0), 1, 7)
        Q = QFunction(ds, draws, "lognormal", 2)
        u = to_internal(params)
        H = numerical_hessian(lambda v: Q.per_draw(v)[0], u)
        try:
            info = louis_information(ds, params, draws, coords="internal")
        except InformationError:
            pytest.skip("random point is not a local maximum")
        np.testing.assert_allclose(info, -0.5 * (H + H.T), rtol=1e-6, atol=1e-6 * np.abs(H).max())

    def test_variance_term_vanishes_for_one_draw(self, desk):
        ds, params = desk
        draws = mce_step_general(ds, params, initial_eta(ds, params, 1, 0), 1, 7)
        Q = QFunction(ds, draws, "gamma", 2)
        G = numerical_gradient(Q.per_draw, to_internal(params))
        gbar = G.mean(axis=0)
        assert np.all(G.T @ G / 1 - np.outer(gbar, gbar) == 0)

    def test_symmetric_and_positive(self, table1):
        # enough games that every covariate varies within Type-2 intervals
        ds, _ = simulate_dataset(SimConfig(table1, 80, seed=8))
        draws = mce_step_gamma(ds, table1, 100, 0)
        theta, _ = m_step(ds, draws, "gamma-frailty", table1)
        final = mce_step_gamma(ds, theta, 100, 1, draws)
        info = louis_information(ds, theta, final, "gamma-frailty")
        assert np.abs(info - info.T).max() < 1e-8
        assert np.all(standard_errors(info) > 0)

    def test_tag_mismatch(self, sim_small, table1):
        with pytest.raises(DomainError):
            louis_information(sim_small[0], table1, mce_step_gamma(sim_small[0], table1, 2, 0), "independence")


class TestStandardErrors:
    def test_identity(self):
        np.testing.assert_allclose(standard_errors(np.eye(3)), 1.0)

    def test_diagonal(self):
        np.testing.assert_allclose(standard_errors(np.diag([4.0, 25.0])), [0.5, 0.2])

    def test_correlated(self):
        np.testing.assert_allclose(standard_errors(np.array([[2.0, 1.0], [1.0, 2.0]])), np.sqrt(2 / 3) * np.ones(2))

    def test_singular(self):
        with pytest.raises(InformationError):
            standard_errors(np.ones((2, 2)))
