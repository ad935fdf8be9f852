import logging
import math
from typing import Iterable, Optional, Tuple

import numba
import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import BudgetExceededError, DimensionError, DomainError, NumericalFailure
from app.schemas.ensembles import ProblemInstance
from app.schemas.solvers import BruteForceResult, IrlsParams, SolverStatus, SparseSolution, SurrogateStep

logger = logging.getLogger(__name__)


def energy(z: np.ndarray, instance: ProblemInstance) -> float:
    """残差エネルギー (1/m) Σ_i ((1/√n) Σ_j D_ij z_j - ω_i)²"""
    z = np.asarray(z, dtype=float)
    if z.shape != (instance.n,):
        raise DimensionError(f"representation has shape {z.shape}, expected ({instance.n},)")
    residual = instance.dictionary @ z / math.sqrt(instance.n) - instance.omega
    return float(np.dot(residual, residual) / instance.m)


def _weighted_min_norm(dictionary: np.ndarray, rhs: np.ndarray, weights: np.ndarray, condition_limit: float) -> Tuple[np.ndarray, float]:
    """D z = rhs の重み付き最小ノルム解 z = W Dᵀ(D W Dᵀ)⁻¹ rhs

    Solved through a column-pivoted QR of (D W^{1/2})ᵀ, so the Gram matrix is
    never formed. Its condition number is estimated from the diagonal of R.
    """
    root_w = np.sqrt(weights)
    q, r, piv = linalg.qr((dictionary * root_w).T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    condition = math.inf if diag[-1] == 0.0 else float((diag[0] / diag[-1]) ** 2)
    if not condition <= condition_limit:
        raise NumericalFailure(f"Gram matrix is near-singular (condition estimate {condition:.3e})", condition=condition)
    u = q @ linalg.solve_triangular(r, rhs[piv], trans="T")
    return root_w * u, condition


def min_norm_solution(instance: ProblemInstance, weights: np.ndarray, condition_limit: Optional[float] = None) -> np.ndarray:
    """劣決定系の重み付き最小ノルム解"""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (instance.n,):
        raise DimensionError(f"weights have shape {weights.shape}, expected ({instance.n},)")
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise DomainError("weights must be finite and strictly positive")
    if instance.m > instance.n:
        raise DimensionError(f"system is overdetermined (m={instance.m} > n={instance.n})")
    limit = settings.GRAM_CONDITION_LIMIT if condition_limit is None else condition_limit
    z, _ = _weighted_min_norm(instance.dictionary, math.sqrt(instance.n) * instance.omega, weights, limit)
    return z


def support_of(z: np.ndarray, zero_tol: float) -> list:
    """max|z| に対する相対閾値でサポートを決める"""
    peak = float(np.max(np.abs(z))) if z.size else 0.0
    if peak == 0.0:
        return []
    return np.flatnonzero(np.abs(z) > zero_tol * peak).tolist()


def prune_support(instance: ProblemInstance, z: np.ndarray, zero_tol: float, energy_tol: float) -> np.ndarray:
    """大きい成分から順に最小のサポートを選び、最小二乗で再フィットする

    IRLS の厳密解は ε の下限に張り付いた微小成分を含む。|z| の大きい順に
    上位 k 成分で ω を最小二乗フィットし、残差エネルギーが
    energy_tol·‖ω‖²/m 以下になる最小の k を二分探索で求める。

    Args:
        instance: 問題インスタンス
        z: IRLS の反復解 (長さ n)
        zero_tol: 候補に残す max|z| に対する相対閾値
        energy_tol: 許容残差エネルギー (‖ω‖²/m に対する相対値)

    Returns:
        np.ndarray: 高々 m 個の非ゼロを持つ表現。全ゼロの z はそのまま返す。
    """
    n, m = instance.n, instance.m
    magnitude = np.abs(z)
    candidates = len(support_of(z, zero_tol))
    if candidates == 0:
        return z
    order = np.argsort(-magnitude, kind="stable")
    scaled = instance.scaled_dictionary
    omega = instance.omega
    budget = energy_tol * max(float(np.dot(omega, omega)) / m, np.finfo(float).tiny)

    def refit(k: int) -> Tuple[np.ndarray, np.ndarray, float]:
        support = np.sort(order[:k])
        coef, *_ = linalg.lstsq(scaled[:, support], omega)
        residual = omega - scaled[:, support] @ coef
        return support, coef, float(np.dot(residual, residual)) / m

    high = min(candidates, m)
    best = refit(high)
    low = 1
    if best[2] > budget:
        if candidates <= m:
            # 候補全体でも残差が残る (未収束など) ので反復解を使う
            return z
        low = high
    while low < high:
        middle = (low + high) // 2
        fit = refit(middle)
        if fit[2] <= budget:
            high, best = middle, fit
        else:
            low = middle + 1

    support, coef, _ = best
    pruned = np.zeros(n)
    pruned[support] = coef
    logger.debug(f"Pruned support {candidates} -> {support.size} (m={m}, seed={instance.seed})")
    return pruned


def _solution(instance: ProblemInstance, z: np.ndarray, params: IrlsParams, **diagnostics) -> SparseSolution:
    unpruned = len(support_of(z, params.zero_tol))
    z = prune_support(instance, z, params.zero_tol, params.energy_tol)
    support = support_of(z, params.zero_tol)
    return SparseSolution(
        z=z,
        support=support,
        sparsity_fraction=len(support) / instance.n,
        energy=energy(z, instance),
        unpruned_support=unpruned,
        **diagnostics,
    )


def irls_min_l0(instance: ProblemInstance, params: IrlsParams, condition_limit: Optional[float] = None) -> SparseSolution:
    """IRLS による ℓ0 最小化の近似

    ε-regularised ℓp reweighting: w_i = (z_i² + ε)^(1 - p/2) and
    z = W Dᵀ(D W Dᵀ)⁻¹ √n ω. For each p of the schedule, ε decays from
    epsilon_init down to epsilon_min. Each ε level iterates until the relative
    iterate change falls below √ε/100. The last level of the last p uses
    convergence_tol instead. Numerical trouble is reported in the status and
    never raised.

    The final iterate goes through prune_support, so the reported support
    never exceeds m atoms.
    """
    limit = settings.GRAM_CONDITION_LIMIT if condition_limit is None else condition_limit
    n = instance.n
    dictionary = instance.dictionary
    rhs = math.sqrt(n) * instance.omega

    try:
        z, condition = _weighted_min_norm(dictionary, rhs, np.ones(n), limit)
    except NumericalFailure as e:
        logger.warning(f"IRLS failed on the initial solve (seed={instance.seed}): {e}")
        return _solution(instance, np.zeros(n), params, status=SolverStatus.FAILED, condition=e.condition)

    iterations = 1
    trace = []
    stage = 0
    status = SolverStatus.MAX_ITERATIONS
    last_p = len(params.p_schedule) - 1

    for p_index, p in enumerate(params.p_schedule):
        epsilon = params.epsilon_init
        while True:
            final_level = p_index == last_p and epsilon <= params.epsilon_min
            tol = params.convergence_tol if final_level else max(math.sqrt(epsilon) / 100.0, params.convergence_tol)
            level_converged = False
            for _ in range(params.max_iters):
                weights = (z * z + epsilon) ** (1.0 - p / 2.0)
                try:
                    z_new, condition = _weighted_min_norm(dictionary, rhs, weights, limit)
                except NumericalFailure as e:
                    logger.debug(f"IRLS stopped at stage {stage} (p={p}, eps={epsilon:.1e}): {e}")
                    return _solution(
                        instance, z, params,
                        iterations=iterations, converged=False, status=SolverStatus.ILL_CONDITIONED,
                        condition=e.condition, surrogate_trace=trace,
                    )
                iterations += 1
                trace.append(SurrogateStep(stage=stage, p=p, epsilon=epsilon, value=float(np.sum((z_new * z_new + epsilon) ** (p / 2.0)))))
                change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z_new), np.finfo(float).tiny)
                z = z_new
                if change < tol:
                    level_converged = True
                    break
            stage += 1
            if epsilon <= params.epsilon_min:
                if p_index == last_p and level_converged:
                    status = SolverStatus.CONVERGED
                break
            epsilon = max(epsilon / params.epsilon_decay, params.epsilon_min)

    return _solution(
        instance, z, params,
        iterations=iterations, converged=status is SolverStatus.CONVERGED, status=status,
        condition=condition, surrogate_trace=trace,
    )


@numba.jit(nopython=True)
def _dot(a, b):
    total = 0.0
    for i in range(a.shape[0]):
        total += a[i] * b[i]
    return total


@numba.jit(nopython=True)
def _orthogonalize(v, basis, rank):
    # 二回繰り返す修正グラム・シュミット
    for _ in range(2):
        for q in range(rank):
            v -= _dot(basis[q], v) * basis[q]


@numba.jit(nopython=True)
def _best_ksupport(columns, omega, k, tie_tol):
    """k-部分集合を辞書順に全て調べ、最小残差のサポートとエネルギーを返す

    columns は (n, m) の C 連続配列で、各行が辞書の (1/√n 倍した) 列。
    残差は部分集合ごとに張る正規直交基底への射影で求める。
    """
    n, m = columns.shape
    index = np.arange(k)
    best = index.copy()
    best_energy = np.inf
    basis = np.empty((k, m))
    residual = np.empty(m)
    while True:
        rank = 0
        for j in range(k):
            v = columns[index[j]].copy()
            scale = math.sqrt(_dot(v, v))
            _orthogonalize(v, basis, rank)
            norm = math.sqrt(_dot(v, v))
            if norm > 1e-12 * scale:
                basis[rank] = v / norm
                rank += 1
        residual[:] = omega
        _orthogonalize(residual, basis, rank)
        value = _dot(residual, residual) / m
        if value < best_energy - tie_tol:
            best_energy = value
            best[:] = index

        i = k - 1
        while i >= 0 and index[i] == n - k + i:
            i -= 1
        if i < 0:
            break
        index[i] += 1
        for j in range(i + 1, k):
            index[j] = index[j - 1] + 1
    return best, best_energy


def brute_force_best_ksupport(
    instance: ProblemInstance,
    k: int,
    max_atoms: Optional[int] = None,
    max_subsets: Optional[int] = None,
) -> BruteForceResult:
    """全ての k-部分集合を調べて最小残差のサポートを返す

    The enumeration runs in a compiled kernel. Ties (energies within 1e-12 of
    ‖ω‖²/m) keep the lexicographically smallest support.

    Args:
        instance: 問題インスタンス (n <= max_atoms)
        k: サポートの大きさ
        max_atoms: 原子数の上限 (省略時は BRUTE_FORCE_MAX_ATOMS)
        max_subsets: C(n, k) の上限 (省略時は BRUTE_FORCE_MAX_SUBSETS)

    Returns:
        BruteForceResult: 最良サポート、そのエネルギーと最小二乗係数

    Raises:
        DomainError: k が [1, n] の外
        BudgetExceededError: n または C(n, k) が上限を超える
    """
    max_atoms = settings.BRUTE_FORCE_MAX_ATOMS if max_atoms is None else max_atoms
    max_subsets = settings.BRUTE_FORCE_MAX_SUBSETS if max_subsets is None else max_subsets
    n, m = instance.n, instance.m
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, n={n}], got {k}")
    if n > max_atoms:
        raise BudgetExceededError(f"brute force is limited to n <= {max_atoms}, got n={n}")
    total = math.comb(n, k)
    if total > max_subsets:
        raise BudgetExceededError(f"C({n}, {k}) = {total} subsets exceeds the budget of {max_subsets}")

    scaled = instance.scaled_dictionary
    omega = np.ascontiguousarray(instance.omega, dtype=float)
    tie_tol = 1e-12 * max(float(np.dot(omega, omega)) / m, np.finfo(float).tiny)

    best, best_energy = _best_ksupport(np.ascontiguousarray(scaled.T, dtype=float), omega, k, tie_tol)
    support = tuple(int(i) for i in best)
    coef, *_ = linalg.lstsq(scaled[:, list(support)], omega)
    return BruteForceResult(support=support, energy=max(float(best_energy), 0.0), z_on_support=coef, subsets=total)


def ls_on_support(y: np.ndarray, dictionary: np.ndarray, support: Iterable[int], snr: float, m: int) -> np.ndarray:
    """サポート Ω₀ 上の最小二乗推定 x̂ = √(m/snr)(D_Ω₀ᵀ D_Ω₀)⁻¹ D_Ω₀ᵀ y"""
    y = np.asarray(y, dtype=float)
    dictionary = np.asarray(dictionary, dtype=float)
    if snr <= 0:
        raise DomainError(f"snr must be positive, got {snr}")
    if dictionary.shape[0] != m or y.shape != (m,):
        raise DimensionError(f"observation {y.shape} and dictionary {dictionary.shape} do not match m={m}")
    support = np.array(sorted(set(int(i) for i in support)), dtype=int)
    if support.size == 0 or support.size >= m:
        raise DomainError(f"support size must lie in [1, m={m}), got {support.size}")

    coef, _, rank, _ = linalg.lstsq(dictionary[:, support], y)
    if rank < support.size:
        raise NumericalFailure(f"sub-dictionary is rank deficient (rank {rank} < {support.size})")
    x_hat = np.zeros(dictionary.shape[1])
    x_hat[support] = math.sqrt(m / snr) * coef
    return x_hat
