import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from app.core.config import Settings
from app.core.exceptions import UsageError
from app.core.rng import generator_metadata
from app.schemas.run_config import RunConfig
from app.services.experiments import ExperimentService
from app.services.storage_service import StorageService
from app.services.worker_pool import TrialPool

logger = logging.getLogger(__name__)

# コマンドごとのデフォルト (設定ファイルとフラグで上書きされる)
COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "pdf": {"grid": "-10:10:0.01"},
    "sample": {"count": 1000},
    "curve": {"grid": "0.01:1:0.01"},
    "extrapolate": {"n_list": [40, 60, 80, 120, 160, 200], "trials": 50},
    "qq": {"n": 500, "trials": 10000},
    "energy-scan": {"n_list": [12, 16], "trials": 500},
    "cs-mse": {"snr": 10.0, "n": 400, "trials": 200},
}

REQUIRED: Dict[str, tuple] = {
    "pdf": ("alpha", "kappa"),
    "sample": ("alpha", "kappa"),
    "sparsest": ("alpha", "n"),
    "extrapolate": ("alpha", "n_list", "trials"),
    "qq": ("alpha", "kappa", "n", "trials"),
    "energy-scan": ("alpha", "kappa", "n_list", "trials"),
    "cs-mse": ("alpha", "kappa_x", "snr", "n", "trials"),
}

IRLS_FIELDS = ("p_schedule", "epsilon_init", "epsilon_decay", "epsilon_min", "max_iters", "convergence_tol", "zero_tol", "energy_tol")


def get_settings() -> Settings:
    """実行ごとに環境変数を読み直した Settings"""
    return Settings()


def load_config_file(path: Path) -> Dict[str, Any]:
    """JSON 設定ファイルを読む

    A previous JSON output is accepted too: its metadata.config record is used.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}")
    if isinstance(data, dict) and isinstance(data.get("metadata"), dict) and "config" in data["metadata"]:
        data = data["metadata"]["config"]
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return dict(data)


def build_run_config(command: str, flags: Dict[str, Any], config_path: Optional[Path] = None, settings: Optional[Settings] = None) -> RunConfig:
    """Settings < コマンドのデフォルト < 設定ファイル < フラグ の順にマージ"""
    settings = settings or get_settings()
    merged: Dict[str, Any] = {"seed": settings.SEED, "jobs": settings.JOBS}
    merged.update(COMMAND_DEFAULTS.get(command, {}))

    flags = dict(flags)
    irls: Dict[str, Any] = {}
    if config_path is not None:
        file_values = load_config_file(config_path)
        file_values.pop("command", None)
        irls.update(file_values.pop("irls", None) or {})
        merged.update(file_values)
        logger.debug(f"Loaded config file {config_path}: {sorted(file_values)}")
    irls.update({k: flags.pop(k) for k in IRLS_FIELDS if k in flags})

    merged.update(flags)
    merged["irls"] = irls
    merged["command"] = command
    return RunConfig(**merged)


def check_preconditions(config: RunConfig) -> None:
    """計算を始める前に必須パラメータを確認"""
    command = config.command
    missing = [name for name in REQUIRED.get(command, ()) if getattr(config, name) in (None, [])]
    if missing:
        raise UsageError(f"{command} requires {', '.join('--' + m.replace('_', '-') for m in missing)}")

    if config.alpha and len(config.alpha) > 1 and command != "pdf":
        raise UsageError(f"{command} takes a single --alpha value, got {config.alpha}")
    if command == "threshold" and config.alpha is None and config.kappa is None:
        raise UsageError("threshold requires --alpha, --kappa or both")
    if command == "cs-region" and config.grid is None and (config.alpha is None or config.kappa_x is None):
        raise UsageError("cs-region requires --alpha with --kappa-x, or --grid")
    if command == "curve" and config.simulate_alphas and (not config.n_list or config.trials is None):
        raise UsageError("curve --simulate-alphas requires --n-list and --trials")


def build_metadata(config: RunConfig, settings: Settings) -> Dict[str, Any]:
    return {
        "tool": settings.PROJECT_NAME,
        "version": settings.VERSION,
        "command": config.command,
        "config": config.echo(),
        "seed": config.seed,
        **generator_metadata(),
    }


def get_storage_service(config: RunConfig, settings: Optional[Settings] = None) -> StorageService:
    settings = settings or get_settings()
    return StorageService(metadata=build_metadata(config, settings), out=config.out, fmt=config.format)


def get_experiment_service(config: RunConfig) -> ExperimentService:
    return ExperimentService(pool=TrialPool(jobs=config.jobs))
