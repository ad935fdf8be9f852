import itertools
import math

import numpy as np
import pytest

from app.core.exceptions import BudgetExceededError, DomainError
from app.core.rng import derive_rng
from app.schemas.solvers import IrlsParams, SolverStatus
from app.services import experiments
from app.services.experiments import ExperimentService
from app.services.theory import kappa_star, min_energy
from app.services.worker_pool import TrialPool


class TestQuadraticFit:
    def test_recovers_exact_quadratic(self):
        n_values = [10, 20, 40, 80]
        means = [0.2 + 1.5 / n - 3.0 / n**2 for n in n_values]
        coeffs, residuals = experiments.fit_quadratic_in_inverse_n(n_values, means)
        assert coeffs[0] == pytest.approx(0.2, abs=1e-10)
        assert coeffs[1] == pytest.approx(1.5, abs=1e-8)
        assert coeffs[2] == pytest.approx(-3.0, abs=1e-6)
        assert max(abs(r) for r in residuals) < 1e-12

    def test_weighted_fit_of_exact_data(self):
        n_values = [10, 20, 40]
        means = [0.1 + 2.0 / n for n in n_values]
        coeffs, _ = experiments.fit_quadratic_in_inverse_n(n_values, means, [0.01, 0.02, float("nan")], weighted=True)
        assert coeffs[0] == pytest.approx(0.1, abs=1e-10)

    def test_needs_three_points(self):
        with pytest.raises(DomainError):
            experiments.fit_quadratic_in_inverse_n([10, 20], [0.1, 0.2])


class TestThresholdCurve:
    def test_well_posed_end(self):
        row = experiments.threshold_curve([1.0])[0]
        assert row.xi == 0.0
        assert row.kappa_star == pytest.approx(1.0, abs=1e-10)
        assert row.trivial == 1.0

    def test_below_trivial_and_increasing(self):
        rows = experiments.threshold_curve(np.linspace(0.01, 0.99, 99))
        values = [r.kappa_star for r in rows]
        assert all(r.kappa_star < r.alpha for r in rows)
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_rejects_zero(self):
        with pytest.raises(DomainError):
            experiments.threshold_curve([0.0, 0.5])


class TestCsRegion:
    def test_reference_point(self):
        outcome = experiments.cs_region(0.5, 0.05)
        assert outcome.bound == pytest.approx(0.429, abs=2e-3)
        assert outcome.decodable
        assert outcome.noiseless_weak and outcome.noiseless_strong
        k_star = kappa_star(0.5).kappa_star
        assert outcome.kappa0 == pytest.approx(0.05 + k_star - 0.05 * k_star)

    def test_outside_region(self):
        outcome = experiments.cs_region(0.5, 0.45)
        assert not outcome.decodable
        assert outcome.noiseless_weak
        assert not outcome.noiseless_strong

    @pytest.mark.parametrize("alpha,kappa_x", [(1.0, 0.1), (0.0, 0.1), (0.5, 0.0)])
    def test_domain(self, alpha, kappa_x):
        with pytest.raises(DomainError):
            experiments.cs_region(alpha, kappa_x)

    def test_region_curve(self):
        rows = experiments.decodable_region_curve(np.linspace(0.05, 0.95, 19))
        for row in rows:
            assert 0.0 < row.noisy_bound < row.alpha
            assert row.noiseless_weak == row.alpha
            assert row.noiseless_strong == pytest.approx(row.alpha / 2)


class TestPdfFamily:
    def test_single_alpha_columns(self):
        table = experiments.pdf_family(0.1, [0.2], np.linspace(-5, 5, 11))
        assert table.columns == ["zeta", "p"]
        assert len(table.rows) == 11
        assert table.rows[5] == [0.0, 0.0]

    def test_family_columns(self):
        table = experiments.pdf_family(0.1, [0.1, 0.2, 0.3], [0.0, 3.0])
        assert table.columns == ["zeta", "p_0.1", "p_0.2", "p_0.3"]
        assert table.gaps == sorted(table.gaps)

    def test_alpha_beyond_measurement_threshold(self):
        with pytest.raises(DomainError):
            experiments.pdf_family(0.1, [0.2, 0.5], [0.0])


class TestOracleSupport:
    def test_contains_data_support(self):
        data_support = np.array([3, 17, 42])
        support = experiments.oracle_support(data_support, 60, 10, derive_rng(1, "oracle"))
        assert support.size == 10
        assert set(data_support) <= set(support.tolist())
        assert np.all(np.diff(support) > 0)

    def test_too_small(self):
        with pytest.raises(DomainError):
            experiments.oracle_support(np.array([1, 2, 3]), 10, 2, derive_rng(1, "oracle"))


class TestSweep:
    def test_mapping_trials_excludes_empty_n(self, inline_service):
        report = inline_service.sweep_min_sparsity(
            0.5, [10, 12, 14, 16], {10: 10, 12: 10, 14: 10, 16: 0}, IrlsParams(), seed=3
        )
        assert report.excluded_n == [16]
        assert [s.n for s in report.per_n] == [10, 12, 14]
        for stat in report.per_n:
            assert stat.trials + stat.excluded == 10
            assert 0.0 < stat.mean_sparsity <= 1.0
        assert len(report.quadratic_coeffs) == 3
        assert report.kappa_theory == pytest.approx(kappa_star(0.5).kappa_star)

    def test_too_few_trials(self, inline_service):
        with pytest.raises(DomainError):
            inline_service.sweep_min_sparsity(0.5, [10, 12, 14], 5, IrlsParams(), seed=3)

    def test_too_few_n(self, inline_service):
        with pytest.raises(DomainError):
            inline_service.sweep_min_sparsity(0.5, [10, 12], 10, IrlsParams(), seed=3)

    def test_counts_trials_that_hit_max_iters(self, inline_service):
        report = inline_service.sweep_min_sparsity(0.5, [10, 12, 14], 10, IrlsParams(max_iters=1), seed=3)
        for stat in report.per_n:
            assert stat.trials + stat.excluded == 10
            assert stat.not_converged <= stat.trials
        assert sum(s.not_converged for s in report.per_n) > 0

    def test_ill_conditioned_trials_are_excluded(self, inline_service, monkeypatch):
        calls = itertools.count()
        real = experiments.irls_min_l0

        def every_other_ill_conditioned(instance, params):
            solution = real(instance, params)
            if next(calls) % 2:
                return solution.model_copy(update={"status": SolverStatus.ILL_CONDITIONED, "converged": False})
            return solution

        monkeypatch.setattr(experiments, "irls_min_l0", every_other_ill_conditioned)
        report = inline_service.sweep_min_sparsity(0.5, [10, 12, 14], 10, IrlsParams(), seed=3)
        for stat in report.per_n:
            assert (stat.trials, stat.excluded, stat.ill_conditioned) == (5, 5, 5)

    def test_simulated_curve(self, inline_service):
        rows = inline_service.simulated_threshold_curve([0.5, 1.0], [10, 12, 14], 10, IrlsParams(), seed=4)
        assert [r.alpha for r in rows] == [0.5, 1.0]
        assert [r.trivial for r in rows] == [0.5, 1.0]
        assert rows[1].kappa_theory == pytest.approx(1.0, abs=1e-10)


class TestQQ:
    def test_small_run(self, inline_service):
        report = inline_service.qq_experiment(0.2, 0.1, n=100, trials=50, seed=8, points=100)
        assert (report.m, report.pooled_entries) == (20, 1000)
        assert len(report.points) == 100
        assert abs(report.pooled_mean) <= 4 * report.mean_std_error
        assert report.theory_variance == pytest.approx(0.836, abs=2e-3)
        quantiles = [p.empirical_quantile for p in report.points]
        assert quantiles == sorted(quantiles)

    def test_outside_achievable_region(self, inline_service):
        with pytest.raises(DomainError):
            inline_service.qq_experiment(0.5, 0.1, n=100, trials=5, seed=8)


class TestConverseEnergy:
    def test_small_case(self, inline_service):
        report = inline_service.converse_energy_experiment(0.75, 0.125, [8], trials=5, seed=2)
        row = report.rows[0]
        assert (row.n, row.m, row.k, row.trials) == (8, 6, 1, 5)
        assert 0.0 < row.mean_energy < 1.0
        assert row.theory == pytest.approx(0.33, abs=5e-3)

    def test_full_support_has_zero_energy(self, inline_service):
        report = inline_service.converse_energy_experiment(0.5, 0.5, [8], trials=3, seed=2)
        assert report.rows[0].k == report.rows[0].m == 4
        assert report.rows[0].mean_energy < 1e-20
        assert report.rows[0].theory == 0.0

    def test_theory_uses_rounded_sparsity(self, inline_service):
        report = inline_service.converse_energy_experiment(0.75, 0.125, [12], trials=2, seed=2)
        row = report.rows[0]
        assert row.k == 2
        assert row.effective_kappa == pytest.approx(1 / 6)
        assert row.theory == pytest.approx(min_energy(0.75, 2 / 12).min_energy, rel=1e-14)
        assert report.nominal_theory == pytest.approx(0.33, abs=5e-3)
        assert row.theory < report.nominal_theory

    def test_budget(self, inline_service):
        with pytest.raises(BudgetExceededError):
            inline_service.converse_energy_experiment(0.75, 0.125, [30], trials=1, seed=2)


class TestCsMse:
    def test_small_run(self, inline_service):
        outcome = inline_service.cs_mse_experiment(0.5, 0.05, snr=10.0, n=100, trials=20, seed=6)
        assert (outcome.m, outcome.k0) == (50, 17)
        assert outcome.trials + outcome.rank_deficient == 20
        assert outcome.mse_asymptotic == pytest.approx(outcome.kappa0 / 10.0)
        assert outcome.mse_oracle == pytest.approx(0.005)
        assert outcome.mse_wishart == pytest.approx((50 / 1000) * 17 / 32)
        assert outcome.mse_measured > outcome.mse_oracle
        assert outcome.data_prior == experiments.DATA_PRIOR

    def test_not_decodable(self, inline_service):
        with pytest.raises(DomainError):
            inline_service.cs_mse_experiment(0.5, 0.45, snr=10.0, n=100, trials=5, seed=6)


class TestWorkerCountIndependence:
    def test_qq_report(self):
        one = ExperimentService(TrialPool(jobs=1)).qq_experiment(0.2, 0.1, n=50, trials=20, seed=5, points=50)
        two = ExperimentService(TrialPool(jobs=2)).qq_experiment(0.2, 0.1, n=50, trials=20, seed=5, points=50)
        assert one.model_dump() == two.model_dump()

    def test_energy_report(self):
        one = ExperimentService(TrialPool(jobs=1)).converse_energy_experiment(0.75, 0.125, [8, 10], trials=6, seed=5)
        two = ExperimentService(TrialPool(jobs=2)).converse_energy_experiment(0.75, 0.125, [8, 10], trials=6, seed=5)
        assert one.model_dump() == two.model_dump()


@pytest.mark.slow
class TestReferenceRuns:
    def test_qq_variance_and_normality(self):
        report = ExperimentService().qq_experiment(0.2, 0.1, n=500, trials=10_000, seed=1)
        assert report.pooled_entries == 1_000_000
        assert abs(report.variance_rel_error) <= 0.02
        assert report.ks_measured <= 0.01
        assert report.qq_slope == pytest.approx(math.sqrt(report.pooled_variance), rel=0.02)

    def test_cs_mse_matches_wishart_expectation(self):
        outcome = ExperimentService().cs_mse_experiment(0.5, 0.05, snr=10.0, n=400, trials=200, seed=1)
        assert (outcome.m, outcome.k0) == (200, 67)
        assert outcome.rank_deficient == 0
        assert outcome.mse_measured == pytest.approx(outcome.mse_wishart, rel=0.05)

    def test_energy_scan_structure(self):
        report = ExperimentService().converse_energy_experiment(0.75, 0.125, [12, 16], trials=500, seed=1)
        assert [(r.n, r.m, r.k) for r in report.rows] == [(12, 9, 2), (16, 12, 2)]
        for row in report.rows:
            assert 0.0 < row.mean_energy < 1.0
            assert row.std_error < 0.05
            assert row.mean_energy > row.theory
        gaps = [(r.mean_energy - r.theory) / r.theory for r in report.rows]
        assert gaps[1] < gaps[0]

    def test_sweep_structure(self):
        report = ExperimentService().sweep_min_sparsity(0.5, [40, 60, 80, 120], 20, IrlsParams(), seed=1)
        k_star = kappa_star(0.5).kappa_star
        assert report.excluded_n == []
        assert [s.m for s in report.per_n] == [20, 30, 40, 60]
        for stat in report.per_n:
            assert 0.0 < stat.mean_sparsity <= stat.m / stat.n
            assert stat.mean_sparsity >= k_star - 3 * stat.std_error
        assert math.isfinite(report.kappa_extrapolated)
        assert len(report.fit_residuals) == 4
