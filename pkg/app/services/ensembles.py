import csv
import logging
import math
from pathlib import Path
from typing import Union

import numpy as np

from app.core.exceptions import DimensionError, DomainError
from app.core.rng import derive_rng, validate_seed
from app.schemas.ensembles import DictionaryKind, ProblemInstance

logger = logging.getLogger(__name__)

INSTANCE_HEADER = ["m", "n", "alpha", "kind", "seed"]


def measurement_count(n: int, alpha: float) -> int:
    """m = round(αn)"""
    return int(round(alpha * n))


def draw_dictionary(m: int, n: int, kind: DictionaryKind, rng: np.random.Generator) -> np.ndarray:
    """平均0・分散1の i.i.d. 辞書を生成"""
    kind = DictionaryKind(kind)
    if kind is DictionaryKind.GAUSSIAN:
        return rng.standard_normal((m, n))
    return 2.0 * rng.integers(0, 2, size=(m, n)).astype(float) - 1.0


def draw_instance(n: int, alpha: float, kind: DictionaryKind, seed: int) -> ProblemInstance:
    """(n, α, kind, seed) から決定的に問題インスタンスを生成

    辞書とノイズはそれぞれ独立なサブストリームから引く。

    Raises:
        DomainError: n < 2 または α が (0, 1] の外
        DimensionError: m = round(αn) が 0
    """
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    seed = validate_seed(seed)
    m = measurement_count(n, alpha)
    if m < 1:
        raise DimensionError(f"round(alpha * n) = round({alpha} * {n}) is 0")

    dictionary = draw_dictionary(m, n, kind, derive_rng(seed, "dictionary"))
    omega = derive_rng(seed, "noise").standard_normal(m)
    return ProblemInstance(m=m, n=n, alpha=m / n, kind=DictionaryKind(kind), seed=seed, dictionary=dictionary, omega=omega)


def synthesize(dictionary: np.ndarray, z: np.ndarray) -> np.ndarray:
    """ω = (1/√n) D z"""
    dictionary = np.asarray(dictionary, dtype=float)
    z = np.asarray(z, dtype=float)
    if dictionary.ndim != 2 or z.shape != (dictionary.shape[1],):
        raise DimensionError(f"cannot synthesize: dictionary {dictionary.shape} vs representation {z.shape}")
    return dictionary @ z / math.sqrt(dictionary.shape[1])


def export_instance_csv(instance: ProblemInstance, path: Union[str, Path]) -> Path:
    """インスタンスを CSV に書き出す

    Row 1 is the header `m,n,alpha,kind,seed`, row 2 its values. Then come m
    rows `D_i1,...,D_in,omega_i` (dictionary row-major, ω as the last column).
    """
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(INSTANCE_HEADER)
        writer.writerow([instance.m, instance.n, f"{instance.alpha:.17g}", instance.kind.value, instance.seed])
        for row, omega_i in zip(instance.dictionary, instance.omega):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{omega_i:.17g}"])
    logger.info(f"Instance exported: {path} (m={instance.m}, n={instance.n})")
    return path


def load_instance_csv(path: Union[str, Path]) -> ProblemInstance:
    """export_instance_csv で書いた CSV を読み戻す"""
    path = Path(path)
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    if len(rows) < 3 or rows[0] != INSTANCE_HEADER:
        raise DimensionError(f"{path} is not an instance CSV")
    m, n, alpha, kind, seed = rows[1]
    body = np.array(rows[2:], dtype=float)
    if body.shape != (int(m), int(n) + 1):
        raise DimensionError(f"{path}: expected {m}x{int(n) + 1} body, got {body.shape}")
    return ProblemInstance(
        m=int(m),
        n=int(n),
        alpha=float(alpha),
        kind=DictionaryKind(kind),
        seed=int(seed),
        dictionary=body[:, :-1],
        omega=body[:, -1],
    )
