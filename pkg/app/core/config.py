import os
from typing import Any, List, Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    PROJECT_NAME: str = "swn"
    VERSION: str = "1.0.0"

    # 乱数設定
    SEED: int = 1
    GENERATOR_NAME: str = "philox"
    SEED_SCHEME: str = "swn-seedseq-v1"

    # 並列実行 (Noneならマシンのコア数)
    JOBS: Optional[int] = None

    LOG_LEVEL: str = "INFO"

    # IRLSのデフォルト値
    IRLS_P_SCHEDULE: List[float] = [1.0, 0.5, 0.1]
    IRLS_EPSILON_INIT: float = 1.0
    IRLS_EPSILON_DECAY: float = 10.0
    IRLS_EPSILON_MIN: float = 1e-8
    IRLS_MAX_ITERS: int = 100  # ステージごと
    IRLS_CONVERGENCE_TOL: float = 1e-8
    IRLS_ZERO_TOL: float = 1e-6  # max|z| に対する相対値
    IRLS_ENERGY_TOL: float = 1e-4  # ‖ω‖²/m に対する相対値 (サポートの刈り込み)

    # Gram行列の条件数上限
    GRAM_CONDITION_LIMIT: float = 1e16

    # 全探索のガード
    BRUTE_FORCE_MAX_ATOMS: int = 24
    BRUTE_FORCE_MAX_SUBSETS: int = 1_000_000

    # QQテーブルの点数
    QQ_POINTS: int = 1000

    model_config = SettingsConfigDict(env_prefix="SWN_", case_sensitive=True)

    def __init__(self, **data: Any):
        super().__init__(**data)

        if self.JOBS is None:
            self.JOBS = os.cpu_count() or 1


settings = Settings()
