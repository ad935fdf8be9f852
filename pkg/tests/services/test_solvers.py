import itertools
import math

import numpy as np
import pytest
from scipy import linalg

from app.core.exceptions import BudgetExceededError, DimensionError, DomainError, NumericalFailure
from app.core.rng import derive_rng
from app.schemas.ensembles import DictionaryKind
from app.schemas.solvers import IrlsParams, SolverStatus
from app.services import density, solvers
from app.services.ensembles import draw_instance
from app.services.theory import kappa_star


@pytest.fixture
def params() -> IrlsParams:
    return IrlsParams()


class TestEnergy:
    def test_zero_representation(self, instance):
        expected = float(np.dot(instance.omega, instance.omega)) / instance.m
        assert solvers.energy(np.zeros(instance.n), instance) == pytest.approx(expected, rel=1e-15)

    def test_matches_explicit_sum(self, instance):
        z = derive_rng(2, "z").standard_normal(instance.n)
        total = 0.0
        for i in range(instance.m):
            row = sum(instance.dictionary[i, j] * z[j] for j in range(instance.n)) / math.sqrt(instance.n)
            total += (row - instance.omega[i]) ** 2
        assert solvers.energy(z, instance) == pytest.approx(total / instance.m, rel=1e-12)

    def test_dimension_mismatch(self, instance):
        with pytest.raises(DimensionError):
            solvers.energy(np.zeros(instance.n - 1), instance)


class TestMinNormSolution:
    def test_square_system(self):
        instance = draw_instance(12, 1.0, DictionaryKind.GAUSSIAN, seed=4)
        z = solvers.min_norm_solution(instance, np.ones(12))
        np.testing.assert_allclose(instance.dictionary @ z, math.sqrt(12) * instance.omega, atol=1e-10)

    def test_minimal_norm(self, instance):
        z = solvers.min_norm_solution(instance, np.ones(instance.n))
        np.testing.assert_allclose(z, np.linalg.pinv(instance.dictionary) @ (math.sqrt(instance.n) * instance.omega), atol=1e-9)

        null = linalg.null_space(instance.dictionary)
        rng = derive_rng(3, "null")
        for _ in range(20):
            other = z + null @ rng.standard_normal(null.shape[1])
            assert np.linalg.norm(other) >= np.linalg.norm(z)

    def test_weight_scale_invariance(self, instance):
        weights = derive_rng(5, "w").uniform(0.5, 2.0, size=instance.n)
        a = solvers.min_norm_solution(instance, weights)
        b = solvers.min_norm_solution(instance, 7.5 * weights)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_exact_representation(self, instance):
        z = solvers.min_norm_solution(instance, np.ones(instance.n))
        scale = float(np.dot(instance.omega, instance.omega)) / instance.m
        assert solvers.energy(z, instance) <= 1e-16 * scale

    def test_weights_must_be_positive(self, instance):
        weights = np.ones(instance.n)
        weights[3] = 0.0
        with pytest.raises(DomainError):
            solvers.min_norm_solution(instance, weights)

    def test_near_singular_gram_is_flagged(self, instance):
        with pytest.raises(NumericalFailure) as excinfo:
            solvers.min_norm_solution(instance, np.ones(instance.n), condition_limit=1.0)
        assert excinfo.value.condition > 1.0


class TestIrls:
    def test_recovers_one_sparse(self, make_planted, params):
        n, j = 50, 17
        z = np.zeros(n)
        z[j] = math.sqrt(n)
        instance = make_planted(n, 0.5, z)
        solution = solvers.irls_min_l0(instance, params)
        assert solution.support == [j]
        assert solution.sparsity_fraction == pytest.approx(1 / n)
        assert solution.energy < 1e-10

    def test_planted_sparse_representation(self, make_planted, params):
        n, alpha = 100, 0.5
        k = int(round(kappa_star(alpha).kappa_star * 1.3 * n))
        law = density.density_params(kappa=k / n, alpha=alpha)
        recovered = 0
        for seed in range(5):
            z = density.sample_sparse_vector(n, law, derive_rng(seed, "planted"))
            solution = solvers.irls_min_l0(make_planted(n, alpha, z, seed=seed), params)
            if solution.sparsity_fraction <= k / n + 0.05:
                recovered += 1
        assert recovered >= 4

    def test_solution_fields_consistent(self, instance, params):
        solution = solvers.irls_min_l0(instance, params)
        assert 0.0 <= solution.sparsity_fraction <= 1.0
        assert solution.energy == pytest.approx(solvers.energy(solution.z, instance), abs=1e-10)
        assert solution.support == solvers.support_of(solution.z, params.zero_tol)
        assert len(solution.support) <= min(instance.m, solution.unpruned_support)
        assert solution.iterations > 1
        assert solution.converged == (solution.status is SolverStatus.CONVERGED)

    def test_support_never_exceeds_measurements(self, params):
        fractions = []
        for seed in range(3):
            instance = draw_instance(120, 0.5, DictionaryKind.GAUSSIAN, seed=seed)
            solution = solvers.irls_min_l0(instance, params)
            scale = float(np.dot(instance.omega, instance.omega)) / instance.m
            assert len(solution.support) <= instance.m
            assert solution.energy <= params.energy_tol * scale
            fractions.append(solution.sparsity_fraction)
        assert sum(fractions) / len(fractions) < 0.5

    def test_surrogate_non_increasing_within_stage(self, instance, params):
        solution = solvers.irls_min_l0(instance, params)
        trace = solution.surrogate_trace
        assert trace
        for before, after in zip(trace, trace[1:]):
            if before.stage == after.stage:
                assert after.value <= before.value * (1 + 1e-10) + 1e-12

    def test_failure_is_a_status(self, instance, params):
        solution = solvers.irls_min_l0(instance, params, condition_limit=1.0)
        assert solution.status is SolverStatus.FAILED
        assert not solution.converged
        assert solution.support == []

    def test_params_validation(self):
        with pytest.raises(ValueError):
            IrlsParams(p_schedule=[0.5, 1.0])
        with pytest.raises(ValueError):
            IrlsParams(p_schedule=[3.0])
        with pytest.raises(ValueError):
            IrlsParams(epsilon_init=0.0)


class TestPruneSupport:
    def test_drops_small_entries(self, make_planted):
        n, j = 50, 17
        z = np.zeros(n)
        z[j] = math.sqrt(n)
        instance = make_planted(n, 0.5, z)
        dusty = z + 1e-5 * derive_rng(4, "dust").standard_normal(n)
        pruned = solvers.prune_support(instance, dusty, zero_tol=1e-6, energy_tol=1e-4)
        assert np.flatnonzero(pruned).tolist() == [j]
        assert pruned[j] == pytest.approx(math.sqrt(n), rel=1e-10)

    def test_dense_solution_is_cut_to_m(self, instance):
        z = solvers.min_norm_solution(instance, np.ones(instance.n))
        pruned = solvers.prune_support(instance, z, zero_tol=1e-6, energy_tol=1e-4)
        scale = float(np.dot(instance.omega, instance.omega)) / instance.m
        assert 1 <= np.count_nonzero(pruned) <= instance.m
        assert solvers.energy(pruned, instance) <= 1e-4 * scale

    def test_keeps_iterate_that_does_not_fit(self, instance):
        z = np.zeros(instance.n)
        z[0] = 1.0
        np.testing.assert_array_equal(solvers.prune_support(instance, z, zero_tol=1e-6, energy_tol=1e-4), z)

    def test_zero_vector(self, instance):
        z = np.zeros(instance.n)
        np.testing.assert_array_equal(solvers.prune_support(instance, z, zero_tol=1e-6, energy_tol=1e-4), z)


class TestBruteForce:
    def test_square_support_has_zero_energy(self):
        instance = draw_instance(6, 1.0, DictionaryKind.GAUSSIAN, seed=8)
        result = solvers.brute_force_best_ksupport(instance, 6)
        assert result.support == (0, 1, 2, 3, 4, 5)
        assert result.energy < 1e-20

    def test_one_sparse_planted_column(self, make_planted):
        z = np.zeros(12)
        z[3] = 2.0
        result = solvers.brute_force_best_ksupport(make_planted(12, 0.5, z), 1)
        assert result.support == (3,)
        assert result.energy < 1e-20
        assert result.subsets == 12

    def test_energy_non_increasing_in_k(self):
        instance = draw_instance(10, 0.5, DictionaryKind.GAUSSIAN, seed=9)
        energies = [solvers.brute_force_best_ksupport(instance, k).energy for k in range(1, 6)]
        for before, after in zip(energies, energies[1:]):
            assert after <= before + 1e-15

    def test_matches_lstsq_enumeration(self):
        instance = draw_instance(10, 0.6, DictionaryKind.GAUSSIAN, seed=12)
        scaled = instance.scaled_dictionary
        best, best_energy = None, math.inf
        for subset in itertools.combinations(range(10), 3):
            coef, *_ = np.linalg.lstsq(scaled[:, list(subset)], instance.omega, rcond=None)
            residual = instance.omega - scaled[:, list(subset)] @ coef
            value = float(np.dot(residual, residual)) / instance.m
            if value < best_energy:
                best, best_energy = subset, value
        result = solvers.brute_force_best_ksupport(instance, 3)
        assert result.support == best
        assert result.energy == pytest.approx(best_energy, rel=1e-9)
        assert result.subsets == 120

    def test_ties_keep_lexicographic_first(self):
        base = draw_instance(8, 0.5, DictionaryKind.GAUSSIAN, seed=1)
        silent = base.model_copy(update={"omega": np.zeros(base.m)})
        assert solvers.brute_force_best_ksupport(silent, 2).support == (0, 1)

    def test_irls_never_beats_enumeration(self, params):
        for seed in range(10):
            instance = draw_instance(12, 0.5, DictionaryKind.GAUSSIAN, seed=seed)
            solution = solvers.irls_min_l0(instance, params)
            k = len(solution.support)
            if not 1 <= k <= 6:
                continue
            truncated = np.zeros(instance.n)
            truncated[solution.support] = solution.z[solution.support]
            assert solvers.brute_force_best_ksupport(instance, k).energy <= solvers.energy(truncated, instance) + 1e-12

    def test_budget_guards(self):
        big = draw_instance(25, 0.5, DictionaryKind.GAUSSIAN, seed=1)
        with pytest.raises(BudgetExceededError):
            solvers.brute_force_best_ksupport(big, 2)
        small = draw_instance(20, 0.5, DictionaryKind.GAUSSIAN, seed=1)
        with pytest.raises(BudgetExceededError):
            solvers.brute_force_best_ksupport(small, 10, max_subsets=1000)
        with pytest.raises(DomainError):
            solvers.brute_force_best_ksupport(small, 0)


class TestLsOnSupport:
    @pytest.fixture
    def setup(self):
        n, m, snr = 60, 30, 10.0
        rng = derive_rng(21, "ls")
        dictionary = rng.standard_normal((m, n))
        x = np.zeros(n)
        x[[2, 9, 40]] = rng.standard_normal(3)
        noise = rng.standard_normal(m)
        return n, m, snr, dictionary, x, noise

    def test_noiseless_recovery(self, setup):
        n, m, snr, dictionary, x, _ = setup
        y = math.sqrt(snr / m) * dictionary @ x
        x_hat = solvers.ls_on_support(y, dictionary, [2, 9, 40, 11, 50], snr, m)
        np.testing.assert_allclose(x_hat, x, atol=1e-12)
        assert np.all(x_hat[[i for i in range(n) if i not in (2, 9, 40, 11, 50)]] == 0.0)

    def test_error_scales_with_inverse_root_snr(self, setup):
        n, m, _, dictionary, x, noise = setup
        support = [2, 9, 40, 11]
        errors = {}
        for snr in (10.0, 40.0):
            y = math.sqrt(snr / m) * dictionary @ x + noise
            errors[snr] = solvers.ls_on_support(y, dictionary, support, snr, m) - x
        np.testing.assert_allclose(errors[40.0] * math.sqrt(40.0), errors[10.0] * math.sqrt(10.0), atol=1e-10)

    def test_rank_deficient_sub_dictionary(self, setup):
        _, m, snr, dictionary, _, noise = setup
        dictionary = dictionary.copy()
        dictionary[:, 5] = dictionary[:, 4]
        with pytest.raises(NumericalFailure):
            solvers.ls_on_support(noise, dictionary, [4, 5], snr, m)

    def test_preconditions(self, setup):
        _, m, snr, dictionary, _, noise = setup
        with pytest.raises(DomainError):
            solvers.ls_on_support(noise, dictionary, list(range(m)), snr, m)
        with pytest.raises(DomainError):
            solvers.ls_on_support(noise, dictionary, [1, 2], 0.0, m)
