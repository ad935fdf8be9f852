import argparse
import logging
import re
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli import deps
from app.cli.commands import cs, density, experiments, solvers, theory
from app.core.config import settings
from app.core.exceptions import SwnError, UsageError
from app.log.logging_config import setup_logging
from app.schemas.ensembles import DictionaryKind
from app.schemas.run_config import OutputFormat

logger = logging.getLogger(__name__)

# フラグ以外の Namespace 属性
_NON_CONFIG_ARGS = ("command", "handler", "config", "log_level")
# 負の数で始まる値を取るオプション (--grid -10:10:0.01)
_NEGATIVE_VALUE_OPTIONS = ("--grid",)
_NEGATIVE_VALUE = re.compile(r"^-\d")


def attach_negative_values(argv: List[str]) -> List[str]:
    """`--grid -10:10:0.01` を `--grid=-10:10:0.01` にまとめる (argparse はオプションと誤認する)"""
    merged: List[str] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token in _NEGATIVE_VALUE_OPTIONS and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            merged.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        merged.append(token)
        i += 1
    return merged


def common_options() -> argparse.ArgumentParser:
    """全サブコマンド共通のオプション"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="64-bit seed (fallback: SWN_SEED)")
    common.add_argument("--config", type=str, default=None, help="JSON config file (overridden by flags)")
    common.add_argument("--out", type=str, default=argparse.SUPPRESS, help="output path (default: stdout)")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=argparse.SUPPRESS, help="output format")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (does not change results)")
    common.add_argument("--kind", choices=[k.value for k in DictionaryKind], default=argparse.SUPPRESS, help="dictionary ensemble")
    common.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING, ...")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swn",
        description="Sparse representations of white Gaussian noise: thresholds, densities and Monte Carlo checks.",
    )
    parser.add_argument("--version", action="version", version=f"{settings.PROJECT_NAME} {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parents = [common_options()]
    for module in (theory, density, solvers, experiments, cs):
        module.register(subparsers, parents)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """CLI を実行して終了コードを返す

    0 success, 2 usage error, 3 domain error, 4 numerical failure.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(attach_negative_values(list(sys.argv[1:] if argv is None else argv)))
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0

    if args.log_level:
        setup_logging(args.log_level)

    flags = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG_ARGS}
    try:
        config = deps.build_run_config(args.command, flags, args.config)
        deps.check_preconditions(config)
        storage = deps.get_storage_service(config)
        service = deps.get_experiment_service(config)
        logger.info(f"Running {config.command} (seed={config.seed}, jobs={config.jobs})")
        args.handler(config, storage, service)
    except ValidationError as e:
        logger.error(f"Invalid parameters: {e}")
        return UsageError.exit_code
    except SwnError as e:
        logger.error(f"{args.command}: {e}")
        return e.exit_code
    except OSError as e:
        # 出力先に書けない
        logger.error(f"{args.command}: cannot write output: {e}")
        return UsageError.exit_code
    return 0


def main() -> None:
    setup_logging()
    sys.exit(run(sys.argv[1:]))
