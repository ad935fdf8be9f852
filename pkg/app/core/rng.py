"""シードからラベル付きサブストリームを導出する

(seed, label, ...) -> numpy SeedSequence(entropy=seed, spawn_key=labels) -> Philox.
Streams depend only on the labels, never on the order in which they are drawn,
so the same seed reproduces across any parallel schedule.
"""
import hashlib
from typing import Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import DomainError

Label = Union[str, int]

SEED_LIMIT = 2**64


def validate_seed(seed: int) -> int:
    """64bitの非負整数であることを確認"""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < SEED_LIMIT:
        raise DomainError(f"seed must lie in [0, 2**64), got {seed}")
    return int(seed)


def _label_key(label: Label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if label < 0:
            raise DomainError(f"integer stream labels must be non-negative, got {label}")
        return int(label)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(seed: int, *labels: Label) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=validate_seed(seed),
        spawn_key=tuple(_label_key(label) for label in labels),
    )


def derive_rng(seed: int, *labels: Label) -> np.random.Generator:
    """ラベル付きサブストリームの乱数生成器を返す"""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *labels)))


def derive_seed(seed: int, *labels: Label) -> int:
    """試行ごとの64bit再現トークンを導出"""
    state = seed_sequence(seed, *labels).generate_state(1, dtype=np.uint64)
    return int(state[0])


def generator_metadata() -> dict:
    return {"generator": settings.GENERATOR_NAME, "seed_scheme": settings.SEED_SCHEME}
