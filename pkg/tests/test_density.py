import itertools

import numpy as np
import pytest
from scipy.special import logsumexp

from oracles import (
    histogram_posterior_mean,
    importance_sampling_mean,
    simplex_quadrature_mean,
    union_breakpoint_rule,
)
from series_prior.basis import active_set, make_basis
from series_prior.density import (
    DensityDataset,
    EnumerationCapError,
    TermIndex,
    bases_for_prior,
    credible_band,
    exact_moment,
    j_posterior,
    log_term,
    mc_moment,
)
from series_prior.priors import ModelSizePrior


class TestDataset:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            DensityDataset(np.array([0.5, 1.2]))

    def test_rescale_flag(self):
        data = DensityDataset.from_array([-2.0, 0.0, 6.0], rescale=True)
        np.testing.assert_allclose(data.observations, [0.0, 0.25, 1.0])

    def test_empty_allowed(self):
        assert DensityDataset(np.array([])).n == 0


class TestLogTerm:
    def test_empty_data_term_is_one(self):
        b = make_basis(1, 2)
        val = log_term(b, (1.0, 1.0), DensityDataset(np.array([])), TermIndex(indices=()))
        assert abs(val) < 1e-14

    def test_hand_value_single_observation(self):
        b = make_basis(1, 2)
        data = DensityDataset(np.array([0.25]))
        val = log_term(b, (1.0, 1.0), data, TermIndex(indices=(0,)))
        assert abs(np.exp(val) - 1.0) < 1e-14

    def test_inactive_index_rejected(self):
        b = make_basis(1, 2)
        data = DensityDataset(np.array([0.25]))
        with pytest.raises(ValueError):
            log_term(b, (1.0, 1.0), data, TermIndex(indices=(1,)))

    def test_eval_index_consistency(self):
        b = make_basis(2, 3)
        data = DensityDataset(np.array([0.3]))
        with pytest.raises(ValueError):
            log_term(b, 1.0, data, TermIndex(indices=(1,), eval_index=None), x=0.5)

    def test_sum_over_terms_matches_quadrature_marginal(self):
        # the exponentiated term sum is the marginal likelihood of the data
        rng = np.random.default_rng(1)
        obs = np.sort(rng.random(3))
        data = DensityDataset(obs)
        q, J = 2, 3
        b = make_basis(q, J - q + 1)
        acts = [active_set(b, o) for o in obs]
        terms = [
            log_term(b, 1.0, data, TermIndex(indices=combo))
            for combo in itertools.product(*acts)
        ]
        # independent route: quadrature of the likelihood against the prior
        from oracles import _stick_breaking_rule
        from series_prior.basis import eval_normalized

        theta, W = _stick_breaking_rule(J, 12)
        like = np.prod(theta @ eval_normalized(b, obs).T, axis=1)
        dirichlet_density = float(np.prod(np.arange(1, J)))  # (J-1)! for the all-ones prior
        marginal = float(W @ like) * dirichlet_density
        assert abs(np.exp(logsumexp(terms)) - marginal) < 1e-4 * marginal


class TestExactMoment:
    def test_prior_mean_histogram_is_flat(self):
        mp = ModelSizePrior.geometric(0.5, 5, 10)
        bases = bases_for_prior(1, mp)
        s = exact_moment(DensityDataset(np.array([])), np.linspace(0.01, 0.99, 17), bases, mp)
        np.testing.assert_allclose(s.mean, 1.0, atol=1e-12)

    def test_single_observation_conjugate_update(self):
        mp = ModelSizePrior.geometric(0.5, 2, 2)
        s = exact_moment(
            DensityDataset(np.array([0.25])), np.array([0.2, 0.7]), {2: make_basis(1, 2)}, mp
        )
        np.testing.assert_allclose(s.mean, [4.0 / 3.0, 2.0 / 3.0], atol=1e-13)

    def test_matches_full_term_enumeration(self):
        rng = np.random.default_rng(42)
        obs = np.sort(rng.random(4))
        data = DensityDataset(obs)
        mp = ModelSizePrior.geometric(0.4, 3, 5)
        bases = bases_for_prior(2, mp)
        grid = np.array([0.15, 0.5, 0.85])

        def brute(x=None):
            per_j = []
            for j in mp.support:
                b = bases[j]
                acts = [active_set(b, o) for o in obs]
                terms = []
                for combo in itertools.product(*acts):
                    if x is None:
                        terms.append(log_term(b, 1.0, data, TermIndex(indices=combo)))
                    else:
                        for i0 in active_set(b, x):
                            terms.append(
                                log_term(
                                    b, 1.0, data, TermIndex(indices=combo, eval_index=int(i0)), x=x
                                )
                            )
                per_j.append(mp.log_pmf(int(j)) + logsumexp(terms))
            return logsumexp(per_j)

        log_den = brute()
        expected = np.array([np.exp(brute(float(x)) - log_den) for x in grid])
        s = exact_moment(data, grid, bases, mp)
        np.testing.assert_allclose(s.mean, expected, rtol=1e-12)

    @pytest.mark.parametrize("n,q,J", [(3, 2, 4), (4, 3, 5), (2, 1, 3), (5, 2, 6)])
    def test_oracle_pair_fixed_dimension(self, n, q, J):
        rng = np.random.default_rng(n * 100 + q * 10 + J)
        obs = np.sort(rng.random(n))
        grid = np.linspace(0.05, 0.95, 10)
        mp = ModelSizePrior.geometric(0.5, J, J)
        s = exact_moment(DensityDataset(obs), grid, {J: make_basis(q, J - q + 1)}, mp)
        quad = simplex_quadrature_mean(obs, grid, q, J)
        np.testing.assert_allclose(s.mean, quad, atol=1e-3)
        est, se = importance_sampling_mean(obs, grid, q, J, 200_000, seed=9)
        assert np.all(np.abs(est - s.mean) <= 3.0 * se)

    def test_second_moment_dominates_mean_squared(self):
        rng = np.random.default_rng(8)
        obs = np.sort(rng.random(6))
        mp = ModelSizePrior.geometric(0.5, 4, 7)
        bases = bases_for_prior(2, mp)
        s = exact_moment(DensityDataset(obs), np.linspace(0, 1, 50), bases, mp, m=2)
        assert np.all(s.second_moment >= s.mean**2 - 1e-9)

    def test_exchangeability_bit_identical(self):
        rng = np.random.default_rng(17)
        obs = rng.random(5)
        mp = ModelSizePrior.geometric(0.5, 3, 6)
        bases = bases_for_prior(2, mp)
        grid = np.linspace(0, 1, 21)
        s1 = exact_moment(DensityDataset(obs), grid, bases, mp)
        s2 = exact_moment(DensityDataset(obs[::-1].copy()), grid, bases, mp)
        assert np.array_equal(s1.mean, s2.mean)
        assert np.array_equal(s1.second_moment, s2.second_moment)
        assert np.array_equal(s1.j_weights, s2.j_weights)

    def test_normalization_by_quadrature(self):
        rng = np.random.default_rng(23)
        obs = np.sort(rng.random(12))
        mp = ModelSizePrior.geometric(0.9, 5, 12)
        bases = bases_for_prior(1, mp)
        pts, wts = union_breakpoint_rule(bases)
        s = exact_moment(DensityDataset(obs), pts, bases, mp, m=1)
        assert abs(wts @ s.mean - 1.0) < 1e-6

    def test_histogram_reduction_matches_closed_form(self):
        rng = np.random.default_rng(31)
        obs = rng.random(40)
        mp = ModelSizePrior.geometric(0.7, 5, 15)
        bases = bases_for_prior(1, mp)
        grid = (np.arange(100) + 0.5) / 100
        s = exact_moment(DensityDataset(obs), grid, bases, mp)
        closed = histogram_posterior_mean(obs, grid, 5, 15, 0.7)
        np.testing.assert_allclose(s.mean, closed, rtol=1e-10)

    def test_cap_exceeded_instructs_mc(self):
        rng = np.random.default_rng(4)
        obs = rng.random(30)
        mp = ModelSizePrior.geometric(0.5, 6, 8)
        bases = bases_for_prior(3, mp)
        with pytest.raises(EnumerationCapError, match="Monte-Carlo"):
            exact_moment(DensityDataset(obs), np.array([0.5]), bases, mp, term_cap=10_000)

    def test_empty_truncation_rejected(self):
        mp = ModelSizePrior.geometric(0.5, 5, 6)
        with pytest.raises(ValueError):
            exact_moment(DensityDataset(np.array([0.5])), np.array([0.5]), {}, mp)

    def test_dimension_below_order_rejected(self):
        with pytest.raises(ValueError):
            bases_for_prior(3, ModelSizePrior.geometric(0.5, 2, 6))


class TestMcMoment:
    def test_within_reported_se_of_exact(self):
        rng = np.random.default_rng(7)
        obs = np.sort(rng.random(10))
        mp = ModelSizePrior.geometric(0.5, 5, 10)
        bases = bases_for_prior(3, mp)
        grid = np.linspace(0.005, 0.995, 100)
        ex = exact_moment(DensityDataset(obs), grid, bases, mp)
        mc = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=3000, seed=11)
        assert np.all(np.abs(mc.mean - ex.mean) <= 4.0 * mc.mc_se)
        assert np.all(mc.mc_se > 0.0)

    def test_se_shrinks_at_root_n(self):
        rng = np.random.default_rng(7)
        obs = np.sort(rng.random(10))
        mp = ModelSizePrior.geometric(0.5, 5, 10)
        bases = bases_for_prior(3, mp)
        grid = np.linspace(0.005, 0.995, 50)
        se_small = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=3000, seed=11).mc_se
        se_big = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=30_000, seed=11).mc_se
        ratio = se_small.mean() / se_big.mean()
        assert 2.4 <= ratio <= 4.2

    def test_order_one_degenerates_to_exact(self):
        rng = np.random.default_rng(5)
        obs = np.sort(rng.random(15))
        mp = ModelSizePrior.geometric(0.5, 5, 10)
        bases = bases_for_prior(1, mp)
        grid = np.linspace(0, 1, 30)
        ex = exact_moment(DensityDataset(obs), grid, bases, mp)
        mc = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=50, seed=3)
        np.testing.assert_allclose(mc.mean, ex.mean, rtol=1e-12)
        assert np.all(mc.mc_se == 0.0)

    def test_seeded_reproducibility(self):
        rng = np.random.default_rng(2)
        obs = np.sort(rng.random(8))
        mp = ModelSizePrior.geometric(0.5, 5, 8)
        bases = bases_for_prior(2, mp)
        grid = np.linspace(0, 1, 11)
        a = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=500, seed=42)
        b = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=500, seed=42)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.mc_se, b.mc_se)

    def test_needs_two_draws(self):
        mp = ModelSizePrior.geometric(0.5, 5, 6)
        bases = bases_for_prior(2, mp)
        with pytest.raises(ValueError):
            mc_moment(DensityDataset(np.array([0.5])), np.array([0.5]), bases, mp, n_terms=1)

    def test_moment_ordering_held_under_sampling_noise(self):
        rng = np.random.default_rng(77)
        obs = np.sort(rng.beta(2.0, 2.0, 60))
        mp = ModelSizePrior.geometric(0.9, 5, 25)
        bases = bases_for_prior(3, mp)
        grid = np.linspace(0.005, 0.995, 100)
        s = mc_moment(DensityDataset(obs), grid, bases, mp, n_terms=1000, seed=1)
        assert np.all(s.second_moment >= s.mean**2 - 1e-9)


class TestCredibleBand:
    def test_zero_spread_collapses(self):
        mp = ModelSizePrior.geometric(0.5, 2, 2)
        s = exact_moment(
            DensityDataset(np.array([])), np.array([0.3]), {2: make_basis(1, 2)}, mp, m=2
        )
        banded = credible_band(s)
        assert banded.band_low is not None

    def test_hand_band(self):
        mp = ModelSizePrior.geometric(0.5, 2, 2)
        s = exact_moment(
            DensityDataset(np.array([0.25])), np.array([0.2]), {2: make_basis(1, 2)}, mp, m=2
        )
        sd = np.sqrt(s.second_moment - s.mean**2)
        banded = credible_band(s, 0.95)
        np.testing.assert_allclose(banded.band_high, s.mean + 1.959963984540054 * sd, rtol=1e-12)
        assert banded.band_low[0] >= 0.0

    def test_level_validated(self):
        mp = ModelSizePrior.geometric(0.5, 2, 2)
        s = exact_moment(
            DensityDataset(np.array([])), np.array([0.3]), {2: make_basis(1, 2)}, mp, m=2
        )
        with pytest.raises(ValueError):
            credible_band(s, 1.5)

    def test_requires_second_moment(self):
        mp = ModelSizePrior.geometric(0.5, 2, 2)
        s = exact_moment(
            DensityDataset(np.array([])), np.array([0.3]), {2: make_basis(1, 2)}, mp, m=1
        )
        with pytest.raises(ValueError):
            credible_band(s)


class TestJPosterior:
    def test_no_data_returns_prior(self):
        mp = ModelSizePrior.geometric(0.6, 5, 12)
        bases = bases_for_prior(1, mp)
        j_values, weights = j_posterior(DensityDataset(np.array([])), bases, mp)
        np.testing.assert_allclose(weights, np.exp(mp.log_pmf(j_values)), atol=1e-12)
        assert abs(weights.sum() - 1.0) < 1e-12

    def test_bimodal_data_moves_mass_up(self):
        rng = np.random.default_rng(19)
        obs = np.concatenate([0.05 + 0.08 * rng.random(10), 0.85 + 0.08 * rng.random(10)])
        mp = ModelSizePrior.geometric(0.5, 5, 15)
        bases = bases_for_prior(1, mp)
        j_values, weights = j_posterior(DensityDataset(obs), bases, mp)
        prior_mean_j = np.exp(mp.log_pmf(j_values)) @ j_values
        posterior_mean_j = weights @ j_values
        assert posterior_mean_j > prior_mean_j

    def test_matches_exact_moment_weights(self):
        rng = np.random.default_rng(3)
        obs = np.sort(rng.random(6))
        mp = ModelSizePrior.geometric(0.5, 4, 8)
        bases = bases_for_prior(2, mp)
        _, weights = j_posterior(DensityDataset(obs), bases, mp)
        s = exact_moment(DensityDataset(obs), np.array([0.5]), bases, mp)
        np.testing.assert_allclose(weights, s.j_weights, rtol=1e-12)
