from typing import List, Optional

from pydantic import BaseModel, Field


# ---------------
# 外挿実験 スキーマ
# ---------------
class SparsityStat(BaseModel):
    """ある n での最小スパース率の平均"""
    n: int
    m: int
    mean_sparsity: float
    std_error: float
    trials: int = Field(..., description="有効な試行数")
    excluded: int = Field(0, description="平均から除外した試行数 (失敗と条件数悪化)")
    ill_conditioned: int = Field(0, description="除外のうち Gram 行列が特異に近くなった試行数")
    not_converged: int = Field(0, description="max_iters に達した試行数 (平均には含む)")


class ExtrapolationReport(BaseModel):
    """1/n に対する二次フィットで κ* を外挿した結果"""
    alpha: float
    n_list: List[int]
    per_n: List[SparsityStat]
    excluded_n: List[int] = Field(default_factory=list, description="有効試行がなく除外した n")
    quadratic_coeffs: List[float] = Field(..., description="κ(1/n) = a + b/n + c/n² の (a, b, c)")
    fit_residuals: List[float]
    weighted: bool = False
    kappa_extrapolated: float
    kappa_theory: float
    relative_gap: float = Field(..., description="(κ_ex - κ_th)/κ_th")
    seed: int


# ---------------
# QQ 実験 スキーマ
# ---------------
class QQPoint(BaseModel):
    probability: float
    normal_quantile: float = Field(..., description="N(0,1) の分位点")
    scaled_quantile: float = Field(..., description="N(0, 理論二次モーメント) の分位点")
    empirical_quantile: float


class QQReport(BaseModel):
    """w = Dz/√n の成分分布と正規分布の比較"""
    alpha: float
    kappa: float
    n: int
    m: int
    trials: int
    pooled_entries: int
    pooled_mean: float
    mean_std_error: float
    pooled_variance: float
    theory_variance: float
    variance_rel_error: float
    ks_measured: float = Field(..., description="N(0, 測定分散) に対する KS 統計量")
    ks_standard: float = Field(..., description="N(0,1) に対する KS 統計量")
    qq_slope: float = Field(..., description="経験分位点 vs N(0,1) 分位点の傾き")
    points: List[QQPoint]
    seed: int


# ---------------
# 反対領域エネルギー スキーマ
# ---------------
class EnergyRow(BaseModel):
    n: int
    m: int
    k: int
    effective_kappa: float = Field(..., description="k/n (丸め後の実際のスパース率)")
    mean_energy: float
    std_error: float
    trials: int
    theory: float = Field(..., description="(α-α*_{k/n})/α")


class EnergyScanReport(BaseModel):
    alpha: float
    kappa: float
    nominal_theory: float = Field(..., description="公称 κ での (α-α*_κ)/α")
    rows: List[EnergyRow]
    seed: int


# ---------------
# 雑音付き圧縮センシング スキーマ
# ---------------
class CsOutcome(BaseModel):
    """ℓ0 復号可能領域と LS の MSE"""
    alpha: float
    kappa_x: float
    kappa_star: float
    kappa0: float = Field(..., description="κx + κ*_α - κx κ*_α")
    bound: float = Field(..., description="(α-κ*_α)/(1-κ*_α)")
    decodable: bool
    noiseless_weak: bool = Field(..., description="α > κx")
    noiseless_strong: bool = Field(..., description="α > 2κx")
    snr: Optional[float] = None
    n: Optional[int] = None
    m: Optional[int] = None
    k0: Optional[int] = None
    mse_asymptotic: Optional[float] = Field(None, description="κ0/snr")
    mse_oracle: Optional[float] = Field(None, description="κx/snr (Ω を知る復号器)")
    mse_wishart: Optional[float] = Field(None, description="(m/(snr n)) k0/(m-k0-1)")
    mse_measured: Optional[float] = None
    mse_std_error: Optional[float] = None
    ratio_measured_to_asymptotic: Optional[float] = None
    finite_size_ratio: Optional[float] = Field(None, description="α/(α-κ0)")
    trials: Optional[int] = None
    rank_deficient: Optional[int] = None
    data_prior: Optional[str] = None
    seed: Optional[int] = None


class RegionRow(BaseModel):
    alpha: float
    kappa_star: float
    noisy_bound: float
    noiseless_weak: float
    noiseless_strong: float


# ---------------
# 閾値曲線 スキーマ
# ---------------
class CurveRow(BaseModel):
    alpha: float
    xi: float
    kappa_star: float
    trivial: float = Field(..., description="自明なスパース率 κ = α")


class SimulatedCurveRow(BaseModel):
    alpha: float
    kappa_theory: float
    kappa_extrapolated: float
    trivial: float


# ---------------
# 密度テーブル スキーマ
# ---------------
class PdfTable(BaseModel):
    """固定 κ での周辺密度の族 (ζ グリッド上)"""
    kappa: float
    alphas: List[float]
    alpha_star: float = Field(..., description="α*_κ (密度が定義される上限)")
    gaps: List[float] = Field(..., description="各 α のギャップ ξσ")
    columns: List[str]
    rows: List[List[float]]
