import math

import numpy as np
import pytest

from app.schemas.ensembles import DictionaryKind, ProblemInstance
from app.services.ensembles import draw_instance
from app.services.experiments import ExperimentService
from app.services.worker_pool import TrialPool


@pytest.fixture
def inline_service() -> ExperimentService:
    """ワーカー 1 つで実行する実験サービス"""
    return ExperimentService(pool=TrialPool(jobs=1))


@pytest.fixture
def instance() -> ProblemInstance:
    return draw_instance(n=40, alpha=0.5, kind=DictionaryKind.GAUSSIAN, seed=2024)


@pytest.fixture
def make_planted():
    """ω = D z/√n となる (厳密表現を持つ) インスタンスを作る"""

    def _make(n: int, alpha: float, z: np.ndarray, seed: int = 7) -> ProblemInstance:
        base = draw_instance(n=n, alpha=alpha, kind=DictionaryKind.GAUSSIAN, seed=seed)
        omega = base.dictionary @ np.asarray(z, dtype=float) / math.sqrt(n)
        return base.model_copy(update={"omega": omega})

    return _make


@pytest.fixture(autouse=True)
def _clear_seed_env(monkeypatch):
    monkeypatch.delenv("SWN_SEED", raising=False)
