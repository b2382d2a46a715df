import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import beta as beta_dist
from scipy.stats import kstest

from series_prior.basis import make_basis
from series_prior.harness import (
    ExperimentConfig,
    TrueDensity,
    beta_half,
    fit_density,
    get_density,
    grid_metrics,
    metric_grid,
    mixture_51,
    read_config,
    read_observations,
    run_experiment,
    sample_density,
    spline_density,
    worker_count,
    write_summary,
)
from series_prior.priors import ModelSizePrior
from series_prior.quadrature import simpson_panel_rule


class TestTrueDensities:
    def test_mixture_normalizer_from_quadrature(self):
        m = mixture_51()
        pts, wts = simpson_panel_rule([0.0, 1.0], 10_000)
        assert abs(wts @ m.pdf(pts) - 1.0) < 1e-8
        assert np.all(m.pdf(metric_grid(10_000)) >= 0.0)

    def test_beta_half_integrates_to_one(self):
        val, _ = quad(beta_half().pdf, 0.0, 1.0, limit=200)
        assert abs(val - 1.0) < 1e-8

    def test_spline_density_exact(self):
        b = make_basis(2, 4)
        theta = np.full(b.dimension, 1.0 / b.dimension)
        d = spline_density(b, theta)
        pts, wts = simpson_panel_rule(d.breakpoints, 5000)
        assert abs(wts @ d.pdf(pts) - 1.0) < 1e-10

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            get_density("cauchy")


class TestSampling:
    def test_beta_half_distribution(self):
        draws = sample_density(beta_half(), 100_000, 7).observations
        assert kstest(draws, beta_dist(0.5, 0.5).cdf).statistic < 0.01

    def test_mixture_matches_cdf(self):
        m = mixture_51()
        draws = sample_density(m, 50_000, 3).observations
        pts, wts = simpson_panel_rule([0.0, 1.0], 2000)
        cdf_vals = np.cumsum(wts * m.pdf(pts))

        def cdf(x):
            return np.interp(x, pts, cdf_vals)

        assert kstest(draws, cdf).statistic < 0.015

    def test_seeded_reproducibility(self):
        a = sample_density(mixture_51(), 500, 11).observations
        b = sample_density(mixture_51(), 500, 11).observations
        assert np.array_equal(a, b)

    def test_support_restricted(self):
        draws = sample_density(mixture_51(), 2000, 1).observations
        assert draws.min() >= 0.0 and draws.max() <= 1.0

    def test_broken_envelope_detected(self):
        spike = TrueDensity(
            "custom-spline", 1.0, lambda x: np.exp(-((x - 0.5) ** 2) / 2e-9) / np.sqrt(2e-9 * np.pi)
        )
        with pytest.raises(RuntimeError, match="acceptance rate"):
            sample_density(spike, 1000, 0)


class TestGridMetrics:
    def test_exact_estimate_scores_zero(self):
        m = mixture_51()
        grid = metric_grid(100)
        l1, l2 = grid_metrics(m.pdf(grid), m, grid)
        assert l1 == 0.0 and l2 == 0.0

    def test_constant_offset(self):
        m = mixture_51()
        grid = metric_grid(100)
        l1, l2 = grid_metrics(m.pdf(grid) + 0.1, m, grid)
        assert abs(l1 - 0.1) < 1e-12 and abs(l2 - 0.01) < 1e-12

    def test_uniform_estimate_against_quadrature(self):
        m = mixture_51()
        grid = metric_grid(100)
        l1, _ = grid_metrics(np.ones_like(grid), m, grid)
        pts, wts = simpson_panel_rule([0.0, 1.0], 10_000)
        integral = wts @ np.abs(1.0 - m.pdf(pts))
        assert abs(l1 - integral) < 5e-3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            grid_metrics(np.ones(5), mixture_51(), metric_grid(10))


class TestRunExperiment:
    def test_deterministic_and_flushed(self, tmp_path):
        cfg = ExperimentConfig(
            density="mixture-51", n=15, q=1, replications=3, seed=5,
            output_dir=str(tmp_path / "a"),
        )
        res1 = run_experiment(cfg)
        res2 = run_experiment(
            ExperimentConfig(
                density="mixture-51", n=15, q=1, replications=3, seed=5,
                output_dir=str(tmp_path / "b"),
            )
        )
        assert res1.l1_mean == res2.l1_mean

        def stat_columns(path):  # all columns except wall time
            lines = path.read_text().strip().splitlines()
            return [",".join(ln.split(",")[:3]) for ln in lines]

        assert stat_columns(tmp_path / "a" / "metrics.csv") == stat_columns(
            tmp_path / "b" / "metrics.csv"
        )
        assert (tmp_path / "a" / "summary_rep0.csv").read_bytes() == (
            tmp_path / "b" / "summary_rep0.csv"
        ).read_bytes()
        lines = (tmp_path / "a" / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + one row per replication

    def test_worker_count_invariance(self, tmp_path, monkeypatch):
        cfg = dict(density="mixture-51", n=10, q=1, replications=4, seed=9)
        monkeypatch.setenv("SERIES_PRIOR_THREADS", "1")
        seq = run_experiment(ExperimentConfig(**cfg))
        monkeypatch.setenv("SERIES_PRIOR_THREADS", "3")
        par = run_experiment(ExperimentConfig(**cfg))
        assert [r.l1 for r in seq.rows] == [r.l1 for r in par.rows]
        assert np.array_equal(seq.summaries[2].mean, par.summaries[2].mean)

    def test_reported_se_is_std_over_sqrt_reps(self):
        res = run_experiment(ExperimentConfig(density="beta-half", n=10, q=1, replications=5, seed=2))
        vals = [r.l1 for r in res.rows]
        assert abs(res.l1_se - np.std(vals, ddof=1) / np.sqrt(5)) < 1e-15

    def test_worker_env_validation(self, monkeypatch):
        monkeypatch.setenv("SERIES_PRIOR_THREADS", "-2")
        with pytest.raises(ValueError):
            worker_count(4)
        monkeypatch.setenv("SERIES_PRIOR_THREADS", "soon")
        with pytest.raises(ValueError):
            worker_count(4)
        monkeypatch.setenv("SERIES_PRIOR_THREADS", "0")
        assert worker_count(2) >= 1


class TestEndToEnd:
    def test_io_roundtrip_preserves_normalization(self, tmp_path):
        data = sample_density(mixture_51(), 300, 13)
        model_prior = ModelSizePrior.geometric(0.9, 5, 25)
        bases_breaks = np.unique(
            np.concatenate([make_basis(1, j).breakpoints() for j in range(5, 26)])
        )
        pts, wts = simpson_panel_rule(bases_breaks, 10_000)
        summary = fit_density(data, 1, model_prior, grid=pts, mode="exact")
        path = tmp_path / "summary.csv"
        write_summary(path, summary)
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        assert abs(wts @ rows[:, 1] - 1.0) < 1e-6
        assert np.all(rows[:, 5] == 0.0)


class TestFiles:
    def test_read_observations(self, tmp_path):
        f = tmp_path / "obs.txt"
        f.write_text("0.5\n# comment\n0.25  # trailing\n\n0.75\n")
        np.testing.assert_array_equal(read_observations(f), [0.5, 0.25, 0.75])

    def test_read_config(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# experiment\nq=3\nJ.min=5\ndensity=mixture-51\n")
        assert read_config(f) == {"q": "3", "J.min": "5", "density": "mixture-51"}

    def test_bad_config_line(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("q: 3\n")
        with pytest.raises(ValueError, match="key=value"):
            read_config(f)
