import numpy as np
import pytest
from conftest import random_cluster, random_params
from oracles import ks_distance, lognormal_posterior_cdf
from scipy import integrate, stats

from frailmix.data import Dataset, make_cluster
from frailmix.errors import DataError, DomainError, SamplerError
from frailmix.frailty import (
    ClusterSuffStats,
    frailty_density,
    lognormal_kernel,
    sample_gamma_posterior,
    sample_lognormal_posterior,
    sample_posterior,
    sample_prior,
    segment_sum,
    suff_stats,
    suff_stats_matrix,
)
from frailmix.likelihood import interval_terms
from frailmix.params import FrailtySpec


class TestDensities:
    @pytest.mark.parametrize("spec", [FrailtySpec.gamma(0.247), FrailtySpec.gamma(2.0), FrailtySpec.lognormal(0.6)])
    def test_unit_mass_and_mean(self, spec):
        mass = integrate.quad(lambda w: frailty_density(w, spec), 0, np.inf)[0]
        mean = integrate.quad(lambda w: w * frailty_density(w, spec), 0, np.inf)[0]
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert mean == pytest.approx(1.0, abs=1e-7)

    def test_gamma_variance_is_theta(self):
        spec = FrailtySpec.gamma(0.4)
        var = integrate.quad(lambda w: (w - 1) ** 2 * frailty_density(w, spec), 0, np.inf)[0]
        assert var == pytest.approx(0.4, rel=1e-7)

    def test_degenerate_has_no_density(self):
        with pytest.raises(DomainError):
            frailty_density(1.0, FrailtySpec.degenerate())

    def test_kernel_max_is_one(self):
        s = 0.7
        assert lognormal_kernel(np.exp(-s * s / 2), s) == pytest.approx(1.0)


class TestSuffStats:
    def test_scalar_matches_matrix(self):
        rng = np.random.default_rng(3)
        params = random_params(rng)
        ds = Dataset(tuple(random_cluster(rng, i) for i in range(12)), 2)
        arr = ds.arrays
        eta = rng.integers(0, 2, arr.n_type2)
        phi, psi = suff_stats_matrix(arr, eta[None, :], interval_terms(arr, params).H0)
        it = iter(eta)
        for c, cluster in enumerate(ds.clusters):
            n2 = sum(iv.delta_prev for iv in cluster.intervals)
            st = suff_stats(cluster, [next(it) for _ in range(n2)], params.t1)
            assert st.phi == phi[0, c]
            assert st.psi == pytest.approx(psi[0, c], rel=1e-12)

    def test_wrong_eta_length(self, tiny_dataset, table1):
        with pytest.raises(DataError):
            suff_stats(tiny_dataset.clusters[0], [], table1.t1)

    def test_segment_sum_with_empty_clusters(self):
        ds = Dataset((
            make_cluster("A", "G", [(1.0, 1, ()), (1.0, 1, ()), (1.0, 0, ())]),
            make_cluster("B", "G", [(1.0, 0, ())]),
            make_cluster("C", "G", [(1.0, 1, ()), (1.0, 0, ())]),
        ), 0)
        out = segment_sum(np.array([[2.0, 3.0, 4.0], [1.0, 1.0, 1.0]]), ds.arrays)
        np.testing.assert_array_equal(out, [[5.0, 0.0, 4.0], [2.0, 0.0, 1.0]])


class TestPrior:
    def test_degenerate(self):
        assert sample_prior(FrailtySpec.degenerate(), np.random.default_rng(0)) == 1.0

    @pytest.mark.parametrize("spec", [FrailtySpec.gamma(0.5), FrailtySpec.lognormal(0.5)])
    def test_unit_mean(self, spec):
        w = sample_prior(spec, np.random.default_rng(1), size=200_000)
        assert abs(w.mean() - 1) < 4 * w.std() / np.sqrt(w.size)


class TestGammaPosterior:
    def test_matches_conjugate_law(self):
        rng = np.random.default_rng(4)
        w = sample_gamma_posterior(ClusterSuffStats(3, 1.7), 0.5, rng, size=20_000)
        assert stats.kstest(w, stats.gamma(a=5.0, scale=1 / 3.7).cdf).pvalue > 0.001

    def test_vector_stats(self):
        w = sample_gamma_posterior(ClusterSuffStats(np.array([0.0, 4.0]), np.array([0.1, 2.0])), 1.0,
                                   np.random.default_rng(0))
        assert w.shape == (2,)

    def test_domain(self):
        with pytest.raises(DomainError):
            sample_gamma_posterior(ClusterSuffStats(1, 1), 0.0, np.random.default_rng(0))


class TestLognormalPosterior:
    @pytest.mark.parametrize("phi, psi, sigma", [(0, 0.5, 0.4), (2, 0.0, 0.5), (3, 2.5, 1.2)])
    def test_against_quadrature(self, phi, psi, sigma):
        w = sample_lognormal_posterior(ClusterSuffStats(phi, psi), sigma, np.random.default_rng(9), size=20_000)
        grid, cdf = lognormal_posterior_cdf(phi, psi, sigma)
        assert ks_distance(w, grid, cdf) < 0.015

    def test_zero_phi_zero_psi_is_prior(self):
        w = sample_lognormal_posterior(ClusterSuffStats(0, 0.0), 0.5, np.random.default_rng(2), size=20_000)
        assert stats.kstest(np.log(w), stats.norm(-0.125, 0.5).cdf).pvalue > 0.001

    def test_proposal_cap(self):
        # a sharp likelihood far from the prior mass almost never accepts
        with pytest.raises(SamplerError, match="phi=1.0"):
            sample_lognormal_posterior(ClusterSuffStats(1.0, 1e-8), 0.05, np.random.default_rng(0),
                                       max_proposals=5)

    def test_dispatch(self):
        rng = np.random.default_rng(0)
        st = ClusterSuffStats(np.zeros(3), np.ones(3))
        np.testing.assert_array_equal(sample_posterior(FrailtySpec.degenerate(), st, rng), np.ones(3))
        assert sample_posterior(FrailtySpec.lognormal(0.5), st, rng).shape == (3,)
