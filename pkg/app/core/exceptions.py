class SwnError(Exception):
    """swn全体の基底例外"""

    exit_code = 1


class UsageError(SwnError):
    """コマンドラインの使い方の誤り (引数不足・設定ファイル不正)"""

    exit_code = 2


class DomainError(SwnError, ValueError):
    """操作の前提条件を満たさないパラメータ"""

    exit_code = 3


class DimensionError(DomainError):
    """ベクトル・行列の次元不一致"""


class BudgetExceededError(DomainError):
    """全探索の組合せ数が上限を超えた"""


class NumericalFailure(SwnError, ArithmeticError):
    """Gram行列の特異性やランク落ちなど数値的な失敗"""

    exit_code = 4

    def __init__(self, message: str, condition: float = float("nan")):
        super().__init__(message)
        self.condition = condition
