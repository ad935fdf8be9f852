"""モンテカルロ実験

Each trial gets its own 64-bit token derive_seed(seed, <experiment>, ...),
fans out through TrialPool and comes back in task order. Sums use
math.fsum, so a report depends on (config, seed) only and not on the
worker count.
"""
import logging
import math
from collections import Counter
from functools import partial
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special, stats

from app.core.config import settings
from app.core.exceptions import BudgetExceededError, DomainError, NumericalFailure
from app.core.rng import derive_rng, derive_seed, validate_seed
from app.schemas.density import MarginalDensity
from app.schemas.ensembles import DictionaryKind
from app.schemas.experiments import (
    CsOutcome,
    CurveRow,
    EnergyRow,
    EnergyScanReport,
    ExtrapolationReport,
    PdfTable,
    QQPoint,
    QQReport,
    RegionRow,
    SimulatedCurveRow,
    SparsityStat,
)
from app.schemas.solvers import IrlsParams, SolverStatus
from app.services import density
from app.services.ensembles import draw_dictionary, draw_instance, measurement_count
from app.services.solvers import brute_force_best_ksupport, irls_min_l0, ls_on_support
from app.services.theory import kappa_star, min_energy, second_moment_achievable
from app.services.worker_pool import TrialPool

logger = logging.getLogger(__name__)

DATA_PRIOR = "gaussian N(0,1) non-zeros on a uniform random support"
MIN_SWEEP_TRIALS = 10
# 平均から外す IRLS の終了状態
EXCLUDED_STATUSES = frozenset({SolverStatus.FAILED, SolverStatus.ILL_CONDITIONED})

Trials = Union[int, Mapping[int, int]]


def _mean_and_error(values: Sequence[float]) -> Tuple[float, float]:
    """補償和による平均と標準誤差"""
    count = len(values)
    if count == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / count
    if count == 1:
        return mean, math.nan
    variance = math.fsum((v - mean) ** 2 for v in values) / (count - 1)
    return mean, math.sqrt(variance / count)


def _check_open_unit(name: str, value: float) -> float:
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")
    return float(value)


def _check_grid(alpha_grid: Sequence[float], upper_closed: bool) -> List[float]:
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise DomainError("alpha grid is empty")
    for a in grid:
        inside = 0.0 < a <= 1.0 if upper_closed else 0.0 < a < 1.0
        if not inside:
            raise DomainError(f"alpha grid value {a} lies outside (0, 1{']' if upper_closed else ')'}")
    return grid


# ---------------
# 解析的なテーブル
# ---------------
def threshold_curve(alpha_grid: Sequence[float]) -> List[CurveRow]:
    """(α, κ*_α) と自明な直線 κ = α の表"""
    rows = []
    for a in _check_grid(alpha_grid, upper_closed=True):
        point = kappa_star(a)
        rows.append(CurveRow(alpha=a, xi=point.xi, kappa_star=point.kappa_star, trivial=a))
    return rows


def cs_region(alpha: float, kappa_x: float) -> CsOutcome:
    """ℓ0 復号可能領域の判定 (領域フィールドのみ)"""
    alpha = _check_open_unit("alpha", alpha)
    kappa_x = _check_open_unit("kappa_x", kappa_x)
    k_star = kappa_star(alpha).kappa_star
    bound = (alpha - k_star) / (1.0 - k_star)
    return CsOutcome(
        alpha=alpha,
        kappa_x=kappa_x,
        kappa_star=k_star,
        kappa0=kappa_x + k_star - kappa_x * k_star,
        bound=bound,
        decodable=kappa_x <= bound,
        noiseless_weak=alpha > kappa_x,
        noiseless_strong=alpha > 2.0 * kappa_x,
    )


def decodable_region_curve(alpha_grid: Sequence[float]) -> List[RegionRow]:
    """雑音あり ℓ0 境界と雑音なしの弱・強境界の表"""
    rows = []
    for a in _check_grid(alpha_grid, upper_closed=False):
        k_star = kappa_star(a).kappa_star
        rows.append(
            RegionRow(
                alpha=a,
                kappa_star=k_star,
                noisy_bound=(a - k_star) / (1.0 - k_star),
                noiseless_weak=a,
                noiseless_strong=a / 2.0,
            )
        )
    return rows


def pdf_family(kappa: float, alphas: Sequence[float], grid: Sequence[float]) -> PdfTable:
    """固定 κ で複数の α の周辺密度を ζ グリッド上に並べる"""
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise DomainError("at least one alpha is required")
    family = [density.density_params(kappa, a) for a in alphas]
    zeta = np.asarray(grid, dtype=float)
    if zeta.ndim != 1 or zeta.size == 0:
        raise DomainError("zeta grid must be a non-empty list of values")

    columns = ["zeta"] + (["p"] if len(alphas) == 1 else [f"p_{a:g}" for a in alphas])
    values = np.column_stack([zeta] + [np.asarray(density.pdf(zeta, params)).reshape(-1) for params in family])
    return PdfTable(
        kappa=kappa,
        alphas=alphas,
        alpha_star=family[0].alpha_star,
        gaps=[params.gap for params in family],
        columns=columns,
        rows=values.tolist(),
    )


def fit_quadratic_in_inverse_n(
    n_values: Sequence[int],
    means: Sequence[float],
    std_errors: Optional[Sequence[float]] = None,
    weighted: bool = False,
) -> Tuple[List[float], List[float]]:
    """κ(1/n) = a + b/n + c/n² の最小二乗フィット

    Returns (a, b, c) and the residuals mean - fit. With weighted=True each
    point is weighted by 1/standard error.
    """
    if len(n_values) < 3:
        raise DomainError(f"a quadratic fit in 1/n needs at least 3 values of n, got {len(n_values)}")
    x = 1.0 / np.asarray(n_values, dtype=float)
    y = np.asarray(means, dtype=float)
    w = None
    if weighted and std_errors is not None:
        se = np.asarray(std_errors, dtype=float)
        positive = se[np.isfinite(se) & (se > 0)]
        if positive.size:
            se = np.where(np.isfinite(se) & (se > 0), se, positive.min())
            w = 1.0 / se
        else:
            logger.warning("No positive standard errors; falling back to an unweighted fit")
    c, b, a = np.polyfit(x, y, 2, w=w)
    residuals = y - (a + b * x + c * x * x)
    return [float(a), float(b), float(c)], residuals.tolist()


def oracle_support(data_support: np.ndarray, n: int, k0: int, rng: np.random.Generator) -> np.ndarray:
    """Ω を含む大きさ k0 のオラクルサポート Ω₀ (残りは一様ランダム)"""
    data_support = np.asarray(data_support, dtype=int)
    if not data_support.size <= k0 <= n:
        raise DomainError(f"oracle support size k0={k0} must lie in [|Ω|={data_support.size}, n={n}]")
    rest = np.setdiff1d(np.arange(n), data_support)
    extra = rng.choice(rest, size=k0 - data_support.size, replace=False)
    return np.sort(np.concatenate([data_support, extra]))


# ---------------
# 試行ワーカー (プロセスプールで実行されるのでモジュールレベルに置く)
# ---------------
def _sweep_trial(task: Tuple[int, int, int], alpha: float, kind: DictionaryKind, params: IrlsParams) -> Tuple[int, float, SolverStatus]:
    n, _, trial_seed = task
    solution = irls_min_l0(draw_instance(n, alpha, kind, trial_seed), params)
    return n, solution.sparsity_fraction, solution.status


def _qq_trial(trial_seed: int, n: int, m: int, kind: DictionaryKind, params: MarginalDensity) -> np.ndarray:
    dictionary = draw_dictionary(m, n, kind, derive_rng(trial_seed, "dictionary"))
    z = density.sample_sparse_vector(n, params, derive_rng(trial_seed, "representation"))
    return dictionary @ z / math.sqrt(n)


def _energy_trial(task: Tuple[int, int], alpha: float, k_by_n: Dict[int, int], kind: DictionaryKind) -> float:
    n, trial_seed = task
    return brute_force_best_ksupport(draw_instance(n, alpha, kind, trial_seed), k_by_n[n]).energy


def _cs_trial(trial_seed: int, n: int, alpha: float, k_x: int, k0: int, snr: float, kind: DictionaryKind) -> Optional[float]:
    instance = draw_instance(n, alpha, kind, trial_seed)
    rng = derive_rng(trial_seed, "data")
    data_support = rng.choice(n, size=k_x, replace=False)
    x = np.zeros(n)
    x[data_support] = rng.standard_normal(k_x)
    y = math.sqrt(snr / instance.m) * instance.dictionary @ x + instance.omega
    support0 = oracle_support(data_support, n, k0, rng)
    try:
        x_hat = ls_on_support(y, instance.dictionary, support0, snr, instance.m)
    except NumericalFailure as e:
        logger.warning(f"LS decoding skipped (trial seed={trial_seed}): {e}")
        return None
    error = x_hat - x
    return float(np.dot(error, error)) / n


class ExperimentService:
    """モンテカルロ実験のサービス"""

    def __init__(self, pool: Optional[TrialPool] = None):
        self.pool = pool or TrialPool()

    # ---------------
    # κ* の外挿
    # ---------------
    def sweep_min_sparsity(
        self,
        alpha: float,
        n_list: Sequence[int],
        trials: Trials,
        irls_params: IrlsParams,
        seed: int,
        weighted: bool = False,
        kind: DictionaryKind = DictionaryKind.GAUSSIAN,
    ) -> ExtrapolationReport:
        """n ごとの IRLS 最小スパース率を平均し、1/n の二次式で外挿する

        FAILED と ILL_CONDITIONED の試行は平均から外して数える。max_iters に
        達した試行は平均に含め、not_converged として数える。

        Returns:
            ExtrapolationReport: n ごとの統計、二次フィットの係数と外挿値 κ_ex

        Raises:
            DomainError: α, n_list, trials が不正
            NumericalFailure: 有効な試行を持つ n が 3 つ未満
        """
        if not 0.0 < alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
        seed = validate_seed(seed)
        n_list = [int(n) for n in n_list]
        if len(set(n_list)) != len(n_list):
            raise DomainError(f"n_list contains duplicates: {n_list}")
        for n in n_list:
            if n < 2 or measurement_count(n, alpha) < 2:
                raise DomainError(f"n={n} gives m=round({alpha}*{n}) < 2")

        if isinstance(trials, Mapping):
            per_n = {n: int(trials.get(n, 0)) for n in n_list}
            if any(t < 0 for t in per_n.values()):
                raise DomainError(f"trial counts must be non-negative, got {per_n}")
        else:
            if trials < MIN_SWEEP_TRIALS:
                raise DomainError(f"trials must be at least {MIN_SWEEP_TRIALS}, got {trials}")
            per_n = {n: int(trials) for n in n_list}
        if sum(1 for t in per_n.values() if t > 0) < 3:
            raise DomainError("at least 3 values of n with trials > 0 are needed for the quadratic fit")

        tasks = [(n, t, derive_seed(seed, "sweep", n, t)) for n in n_list for t in range(per_n[n])]
        logger.info(f"Sweep alpha={alpha}: {len(tasks)} IRLS trials over n={n_list}")
        results = self.pool.map(partial(_sweep_trial, alpha=alpha, kind=kind, params=irls_params), tasks, label="IRLS trials")

        values: Dict[int, List[float]] = {n: [] for n in n_list}
        counts: Dict[int, Counter] = {n: Counter() for n in n_list}
        for n, fraction, status in results:
            counts[n][status] += 1
            if status not in EXCLUDED_STATUSES:
                values[n].append(fraction)

        stats_per_n, excluded_n = [], []
        for n in n_list:
            count = counts[n]
            excluded = count[SolverStatus.FAILED] + count[SolverStatus.ILL_CONDITIONED]
            if not values[n]:
                excluded_n.append(n)
                logger.warning(f"n={n} excluded: no valid trials ({excluded} failed or ill-conditioned)")
                continue
            mean, se = _mean_and_error(values[n])
            stats_per_n.append(
                SparsityStat(
                    n=n,
                    m=measurement_count(n, alpha),
                    mean_sparsity=mean,
                    std_error=se,
                    trials=len(values[n]),
                    excluded=excluded,
                    ill_conditioned=count[SolverStatus.ILL_CONDITIONED],
                    not_converged=count[SolverStatus.MAX_ITERATIONS],
                )
            )
            logger.info(
                f"n={n}: mean sparsity {mean:.6f} ± {se:.2e} ({len(values[n])} trials, {excluded} excluded, "
                f"{count[SolverStatus.MAX_ITERATIONS]} hit max_iters)"
            )

        if len(stats_per_n) < 3:
            raise NumericalFailure(f"only {len(stats_per_n)} values of n have valid trials; the quadratic fit needs 3")

        coeffs, residuals = fit_quadratic_in_inverse_n(
            [s.n for s in stats_per_n],
            [s.mean_sparsity for s in stats_per_n],
            [s.std_error for s in stats_per_n],
            weighted=weighted,
        )
        k_theory = kappa_star(alpha).kappa_star
        k_extrapolated = coeffs[0]
        if k_extrapolated <= 0:
            logger.warning(f"Extrapolated sparsity {k_extrapolated:.4g} is not positive; check n_list and trials")

        return ExtrapolationReport(
            alpha=alpha,
            n_list=n_list,
            per_n=stats_per_n,
            excluded_n=excluded_n,
            quadratic_coeffs=coeffs,
            fit_residuals=residuals,
            weighted=weighted,
            kappa_extrapolated=k_extrapolated,
            kappa_theory=k_theory,
            relative_gap=(k_extrapolated - k_theory) / k_theory,
            seed=seed,
        )

    def simulated_threshold_curve(
        self,
        alphas: Sequence[float],
        n_list: Sequence[int],
        trials: Trials,
        irls_params: IrlsParams,
        seed: int,
        weighted: bool = False,
        kind: DictionaryKind = DictionaryKind.GAUSSIAN,
    ) -> List[SimulatedCurveRow]:
        """複数の α で外挿した κ* を理論曲線と並べる"""
        seed = validate_seed(seed)
        rows = []
        for a in alphas:
            report = self.sweep_min_sparsity(a, n_list, trials, irls_params, derive_seed(seed, "curve", repr(float(a))), weighted, kind)
            rows.append(SimulatedCurveRow(alpha=a, kappa_theory=report.kappa_theory, kappa_extrapolated=report.kappa_extrapolated, trivial=a))
        return rows

    # ---------------
    # w の分布
    # ---------------
    def qq_experiment(
        self,
        alpha: float,
        kappa: float,
        n: int,
        trials: int,
        seed: int,
        points: Optional[int] = None,
        kind: DictionaryKind = DictionaryKind.GAUSSIAN,
    ) -> QQReport:
        """密度からサンプルした z で w = Dz/√n を作り、正規分布と比較する"""
        params = density.density_params(kappa, alpha)
        theory_variance = second_moment_achievable(alpha, kappa)
        seed = validate_seed(seed)
        if trials < 1:
            raise DomainError(f"trials must be positive, got {trials}")
        m = measurement_count(n, alpha)
        density.support_size(n, kappa)
        if m < 1:
            raise DomainError(f"n={n} gives m=round({alpha}*{n}) = 0")

        tasks = [derive_seed(seed, "qq", t) for t in range(trials)]
        logger.info(f"QQ alpha={alpha}, kappa={kappa}: {trials} trials of m={m} entries")
        chunks = self.pool.map(partial(_qq_trial, n=n, m=m, kind=kind, params=params), tasks, label="QQ trials")
        w = np.concatenate(chunks)
        count = w.size

        mean = math.fsum(w.tolist()) / count
        variance = math.fsum(((w - mean) ** 2).tolist()) / (count - 1) if count > 1 else math.nan
        ks_measured = float(stats.kstest(w, "norm", args=(0.0, math.sqrt(variance))).statistic)
        ks_standard = float(stats.kstest(w, "norm").statistic)

        size = min(points or settings.QQ_POINTS, count)
        probabilities = (np.arange(1, size + 1) - 0.5) / size
        normal = special.ndtri(probabilities)
        empirical = np.quantile(w, probabilities)
        slope = float(np.polyfit(normal, empirical, 1)[0])
        scale = math.sqrt(theory_variance)

        return QQReport(
            alpha=alpha,
            kappa=kappa,
            n=n,
            m=m,
            trials=trials,
            pooled_entries=count,
            pooled_mean=mean,
            mean_std_error=math.sqrt(variance / count),
            pooled_variance=variance,
            theory_variance=theory_variance,
            variance_rel_error=(variance - theory_variance) / theory_variance,
            ks_measured=ks_measured,
            ks_standard=ks_standard,
            qq_slope=slope,
            points=[
                QQPoint(probability=float(p), normal_quantile=float(q), scaled_quantile=scale * float(q), empirical_quantile=float(e))
                for p, q, e in zip(probabilities, normal, empirical)
            ],
            seed=seed,
        )

    # ---------------
    # 反対領域のエネルギー
    # ---------------
    def converse_energy_experiment(
        self,
        alpha: float,
        kappa: float,
        n_list: Sequence[int],
        trials: int,
        seed: int,
        kind: DictionaryKind = DictionaryKind.GAUSSIAN,
    ) -> EnergyScanReport:
        """全探索の最小エネルギーを平均し (α-α*_κ)/α と比べる

        各 n の理論値は丸め後のスパース率 k/n で評価する。

        Args:
            alpha: 測定比 α
            kappa: 公称スパース率 κ (k = round(κn))
            n_list: 原子数のリスト (n <= BRUTE_FORCE_MAX_ATOMS)
            trials: n ごとの試行数
            seed: 乱数シード
            kind: 辞書の種類

        Returns:
            EnergyScanReport: n ごとの平均最小エネルギーと理論値

        Raises:
            DomainError: α, κ, trials が範囲外
            BudgetExceededError: 全探索の上限を超える n
        """
        nominal = min_energy(alpha, kappa).min_energy
        seed = validate_seed(seed)
        if trials < 1:
            raise DomainError(f"trials must be positive, got {trials}")

        n_list = [int(n) for n in n_list]
        k_by_n = {}
        for n in n_list:
            k = density.support_size(n, kappa)
            if n > settings.BRUTE_FORCE_MAX_ATOMS:
                raise BudgetExceededError(f"brute force is limited to n <= {settings.BRUTE_FORCE_MAX_ATOMS}, got n={n}")
            if math.comb(n, k) > settings.BRUTE_FORCE_MAX_SUBSETS:
                raise BudgetExceededError(f"C({n}, {k}) exceeds the budget of {settings.BRUTE_FORCE_MAX_SUBSETS}")
            k_by_n[n] = k

        rows = []
        for n in n_list:
            tasks = [(n, derive_seed(seed, "energy", n, t)) for t in range(trials)]
            energies = self.pool.map(partial(_energy_trial, alpha=alpha, k_by_n=k_by_n, kind=kind), tasks, label="brute-force trials")
            mean, se = _mean_and_error(energies)
            effective = k_by_n[n] / n
            theory = min_energy(alpha, effective).min_energy
            rows.append(
                EnergyRow(
                    n=n,
                    m=measurement_count(n, alpha),
                    k=k_by_n[n],
                    effective_kappa=effective,
                    mean_energy=mean,
                    std_error=se,
                    trials=trials,
                    theory=theory,
                )
            )
            logger.info(f"n={n}, k={k_by_n[n]}: mean min energy {mean:.6f} ± {se:.2e} (theory {theory:.6f})")

        return EnergyScanReport(alpha=alpha, kappa=kappa, nominal_theory=nominal, rows=rows, seed=seed)

    # ---------------
    # 雑音付き圧縮センシングの MSE
    # ---------------
    def cs_mse_experiment(
        self,
        alpha: float,
        kappa_x: float,
        snr: float,
        n: int,
        trials: int,
        seed: int,
        kind: DictionaryKind = DictionaryKind.GAUSSIAN,
    ) -> CsOutcome:
        """オラクルサポート Ω₀ 上の LS 復号の MSE を測る"""
        outcome = cs_region(alpha, kappa_x)
        if not outcome.decodable:
            raise DomainError(
                f"(alpha={alpha}, kappa_x={kappa_x}) lies outside the decodable region (kappa_x must be <= {outcome.bound:.6g})"
            )
        if snr <= 0:
            raise DomainError(f"snr must be positive, got {snr}")
        if trials < 1:
            raise DomainError(f"trials must be positive, got {trials}")
        seed = validate_seed(seed)

        m = measurement_count(n, alpha)
        k_x = int(round(kappa_x * n))
        k0 = int(round(outcome.kappa0 * n))
        if k_x < 1:
            raise DomainError(f"round(kappa_x * n) = round({kappa_x} * {n}) is 0")
        if k0 < k_x:
            raise DomainError(f"k0={k0} is smaller than the data support size {k_x}")
        if not k0 < m - 2:
            raise DomainError(f"k0={k0} must be smaller than m - 2 = {m - 2}")

        tasks = [derive_seed(seed, "cs-mse", t) for t in range(trials)]
        logger.info(f"CS MSE alpha={alpha}, kappa_x={kappa_x}, snr={snr}: {trials} trials (m={m}, k0={k0})")
        results = self.pool.map(
            partial(_cs_trial, n=n, alpha=alpha, k_x=k_x, k0=k0, snr=snr, kind=kind), tasks, label="LS decoding trials"
        )
        errors = [r for r in results if r is not None]
        rank_deficient = len(results) - len(errors)
        if not errors:
            raise NumericalFailure("every trial had a rank-deficient sub-dictionary")
        measured, se = _mean_and_error(errors)

        mse_asymptotic = outcome.kappa0 / snr
        return outcome.model_copy(
            update={
                "snr": snr,
                "n": n,
                "m": m,
                "k0": k0,
                "mse_asymptotic": mse_asymptotic,
                "mse_oracle": kappa_x / snr,
                "mse_wishart": (m / (snr * n)) * k0 / (m - k0 - 1),
                "mse_measured": measured,
                "mse_std_error": se,
                "ratio_measured_to_asymptotic": measured / mse_asymptotic,
                "finite_size_ratio": alpha / (alpha - outcome.kappa0),
                "trials": len(errors),
                "rank_deficient": rank_deficient,
                "data_prior": DATA_PRIOR,
                "seed": seed,
            }
        )
