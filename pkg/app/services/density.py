"""最小 ℓ2 ノルム κ-スパース表現の非ゼロ成分の周辺密度とサンプラ

p(ζ) = 0                              for |ζ| < ξσ
p(ζ) = (1/(κσ)) φ(ζ/σ)                otherwise,   σ² = α/(α*_κ(α*_κ - α))

The two-sided tail mass 2Q(ξ) = κ cancels the 1/κ prefactor.
"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from app.core.exceptions import DomainError
from app.schemas.density import MarginalDensity
from app.services.theory import alpha_star, q_function

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _as_output(value: np.ndarray) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def density_params(kappa: float, alpha: float) -> MarginalDensity:
    """(κ, α) からパラメータ一式を計算

    Args:
        kappa: スパース率 κ (0, 1)
        alpha: 測定比 α (0 < α < α*_κ)

    Returns:
        MarginalDensity: ξ, α*_κ, σ² = α/(α*_κ(α*_κ-α)) とギャップ ξσ

    Raises:
        DomainError: κ が範囲外、または α が達成可能領域の内部にない場合
    """
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    point = alpha_star(kappa)
    a_star, xi = point.alpha_star, point.xi
    if not 0.0 < alpha < a_star:
        raise DomainError(
            f"density is defined only for 0 < alpha < alpha_star; got alpha={alpha}, alpha_star({kappa})={a_star:.6g}"
        )
    scale_sq = alpha / (a_star * (a_star - alpha))
    return MarginalDensity(
        kappa=kappa,
        alpha=alpha,
        xi=xi,
        alpha_star=a_star,
        scale_sq=scale_sq,
        gap=xi * math.sqrt(scale_sq),
    )


def pdf(zeta: ArrayLike, params: MarginalDensity) -> Union[float, np.ndarray]:
    """周辺密度 p(ζ)"""
    z = np.asarray(zeta, dtype=float)
    sigma = params.scale
    value = np.exp(-0.5 * (z / sigma) ** 2) / (params.kappa * sigma * SQRT_2PI)
    return _as_output(np.where(np.abs(z) < params.gap, 0.0, value))


def cdf(zeta: ArrayLike, params: MarginalDensity) -> Union[float, np.ndarray]:
    """周辺分布関数 F(ζ)"""
    z = np.asarray(zeta, dtype=float)
    tail = np.asarray(q_function(np.abs(z) / params.scale)) / params.kappa
    value = np.where(z <= -params.gap, tail, np.where(z >= params.gap, 1.0 - tail, 0.5))
    return _as_output(value)


def moments(params: MarginalDensity) -> dict:
    return {
        "mean": 0.0,
        "conditional_second_moment": params.conditional_second_moment,
        "entry_second_moment": params.entry_second_moment,
    }


def sample_nonzero(
    params: MarginalDensity,
    rng: np.random.Generator,
    size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> Union[float, np.ndarray]:
    """両側切断ガウスからの厳密サンプリング (逆関数法)

    |ζ| = σ Q⁻¹(u Q(ξ)), u ~ U(0, 1]; the sign is drawn independently.
    """
    signs = 2.0 * rng.integers(0, 2, size=size) - 1.0
    u = 1.0 - rng.random(size)
    tail = u * q_function(params.xi)
    magnitude = np.maximum(-params.scale * special.ndtri(tail), params.gap)
    return _as_output(signs * magnitude)


def support_size(n: int, kappa: float) -> int:
    """k = round(κn) (偶数丸め)"""
    k = int(round(kappa * n))
    if k < 1:
        raise DomainError(f"round(kappa * n) = round({kappa} * {n}) is 0; no non-zero entries to draw")
    return k


def sample_sparse_vector(n: int, params: MarginalDensity, rng: np.random.Generator) -> np.ndarray:
    """一様ランダムなサポートを持つ κ-スパースベクトル"""
    k = support_size(n, params.kappa)
    z = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    z[support] = sample_nonzero(params, rng, size=k)
    return z
