"""WGN スパース表現の閾値系

Closed forms for the sharp achievability threshold of sparse representations of
white Gaussian noise over i.i.d. dictionaries.

    α(ξ) = √(2/π) ∫_ξ^∞ t² e^{-t²/2} dt = √(2/π) ξ e^{-ξ²/2} + 2Q(ξ)
    κ(ξ) = √(2/π) ∫_ξ^∞ e^{-t²/2} dt   = 2Q(ξ)

Both maps decrease strictly from 1 (ξ = 0) to 0 (ξ → ∞). κ*_α and α*_κ are
obtained by inverting one map and evaluating the other.
"""
import logging
import math
from typing import Callable, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize, special

from app.core.exceptions import DomainError
from app.schemas.theory import ConverseLaw, ThresholdPoint

logger = logging.getLogger(__name__)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
XI_BRACKET = (0.0, 40.0)
XI_TOL = 1e-12
# κ = κ*_α は達成可能側に分類する
BOUNDARY_TOL = 1e-12

Real = Union[float, np.ndarray]


def _as_output(value: np.ndarray) -> Real:
    return float(value) if np.ndim(value) == 0 else value


def _check_xi(xi: ArrayLike) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"xi must be non-negative, got {xi}")
    return arr


def _check_unit_interval(name: str, value: float) -> float:
    if not (isinstance(value, (int, float, np.floating)) and 0.0 < float(value) <= 1.0):
        raise DomainError(f"{name} must lie in (0, 1], got {value}")
    return float(value)


def q_function(x: ArrayLike) -> Real:
    """標準正規分布の上側確率 Q(x)

    erfc を使うので裾でも桁落ちしない。
    """
    return _as_output(0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0)))


def alpha_of_xi(xi: ArrayLike) -> Real:
    """α(ξ) の閉形式 (部分積分による)"""
    arr = _check_xi(xi)
    with np.errstate(invalid="ignore", over="ignore"):
        value = SQRT_2_OVER_PI * arr * np.exp(-0.5 * arr * arr) + 2.0 * (0.5 * special.erfc(arr / math.sqrt(2.0)))
    return _as_output(np.where(np.isinf(arr), 0.0, value))


def kappa_of_xi(xi: ArrayLike) -> Real:
    """κ(ξ) = 2Q(ξ)"""
    arr = _check_xi(xi)
    return _as_output(special.erfc(arr / math.sqrt(2.0)))


def _alpha_slope(xi: float) -> float:
    return -SQRT_2_OVER_PI * xi * xi * math.exp(-0.5 * xi * xi)


def _kappa_slope(xi: float) -> float:
    return -SQRT_2_OVER_PI * math.exp(-0.5 * xi * xi)


def _invert(func: Callable[[float], float], slope: Callable[[float], float], target: float) -> float:
    """func(ξ) = target を [0, 40] で解く (Brent 法 + Newton 仕上げ)"""
    if target >= 1.0:
        return 0.0
    lo, hi = XI_BRACKET
    xi = optimize.brentq(lambda t: func(t) - target, lo, hi, xtol=XI_TOL, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = abs(func(xi) - target)
    for _ in range(4):
        derivative = slope(xi)
        if derivative == 0.0 or not math.isfinite(derivative):
            break
        step = (func(xi) - target) / derivative
        candidate = xi - step
        if not lo <= candidate <= hi:
            break
        candidate_residual = abs(func(candidate) - target)
        if candidate_residual > residual:
            break
        xi, residual = candidate, candidate_residual
        if abs(step) <= XI_TOL:
            break
    return float(xi)


def xi_of_alpha(alpha: float) -> float:
    alpha = _check_unit_interval("alpha", alpha)
    return _invert(alpha_of_xi, _alpha_slope, alpha)


def xi_of_kappa(kappa: float) -> float:
    kappa = _check_unit_interval("kappa", kappa)
    return _invert(kappa_of_xi, _kappa_slope, kappa)


def kappa_star(alpha: float) -> ThresholdPoint:
    """測定比 α に対する最小スパース率 κ*_α"""
    xi = xi_of_alpha(alpha)
    k_star = kappa_of_xi(xi)
    logger.debug(f"kappa_star(alpha={alpha}) -> xi={xi}, kappa_star={k_star}")
    return ThresholdPoint(alpha=alpha, kappa=k_star, xi=xi, kappa_star=k_star, alpha_star=float(alpha))


def alpha_star(kappa: float) -> ThresholdPoint:
    """スパース率 κ に対する測定比閾値 α*_κ"""
    xi = xi_of_kappa(kappa)
    a_star = alpha_of_xi(xi)
    logger.debug(f"alpha_star(kappa={kappa}) -> xi={xi}, alpha_star={a_star}")
    return ThresholdPoint(alpha=a_star, kappa=kappa, xi=xi, kappa_star=float(kappa), alpha_star=a_star)


def is_achievable(alpha: float, kappa: float) -> bool:
    """κ ≥ κ*_α (⇔ α ≤ α*_κ) かどうか"""
    return _check_unit_interval("alpha", alpha) - alpha_star(kappa).alpha_star <= BOUNDARY_TOL


def min_energy(alpha: float, kappa: float) -> ConverseLaw:
    """最小エネルギー E_min と最適解の二乗ノルム Q

    Args:
        alpha: 測定比 α (0, 1]
        kappa: スパース率 κ (0, 1]

    Returns:
        ConverseLaw: 達成可能領域では E_min = 0, Q = inf。
        反対領域では E_min = (α-α*_κ)/α, Q = α*_κ/(α-α*_κ)。

    Raises:
        DomainError: α または κ が (0, 1] の外
    """
    alpha = _check_unit_interval("alpha", alpha)
    kappa = _check_unit_interval("kappa", kappa)
    a_star = alpha_star(kappa).alpha_star
    k_star = kappa_star(alpha).kappa_star

    if alpha - a_star <= BOUNDARY_TOL:
        return ConverseLaw(
            alpha=alpha,
            kappa=kappa,
            alpha_star=a_star,
            kappa_star=k_star,
            achievable=True,
            min_energy=0.0,
            opt_sq_norm=math.inf,
            aux_x=math.inf,
        )

    opt_sq_norm = a_star / (alpha - a_star)
    return ConverseLaw(
        alpha=alpha,
        kappa=kappa,
        alpha_star=a_star,
        kappa_star=k_star,
        achievable=False,
        min_energy=(alpha - a_star) / alpha,
        opt_sq_norm=opt_sq_norm,
        aux_x=opt_sq_norm,
    )


def second_moment_achievable(alpha: float, kappa: float) -> float:
    """達成可能領域内部での成分あたり二次モーメント α/(α*_κ-α)"""
    a_star = alpha_star(kappa).alpha_star
    if not 0.0 <= alpha < a_star:
        raise DomainError(f"alpha={alpha} must lie strictly inside the achievable region (alpha < alpha_star={a_star:.6g})")
    return alpha / (a_star - alpha)
