import argparse

from app.cli.commands.options import SUPPRESS, add_alpha, add_grid, add_n, add_trials
from app.schemas.run_config import RunConfig
from app.services.experiments import ExperimentService, cs_region, decodable_region_curve
from app.services.storage_service import StorageService


def _add_kappa_x(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kappa-x", dest="kappa_x", type=float, default=SUPPRESS, help="sparsity fraction of the data vector")


def register(subparsers: argparse._SubParsersAction, parents: list) -> None:
    region = subparsers.add_parser("cs-region", parents=parents, help="l0-decodable region of noisy compressed sensing")
    add_alpha(region)
    _add_kappa_x(region)
    add_grid(region, "alpha grid start:stop:step inside (0, 1) for the region boundaries")
    region.set_defaults(handler=run_cs_region)

    mse = subparsers.add_parser("cs-mse", parents=parents, help="LS-on-oracle-support MSE against the closed forms")
    add_alpha(mse)
    _add_kappa_x(mse)
    mse.add_argument("--snr", type=float, default=SUPPRESS, help="signal-to-noise ratio")
    add_n(mse)
    add_trials(mse)
    mse.set_defaults(handler=run_cs_mse)


def run_cs_region(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    """--grid なら境界の表、そうでなければ 1 点の判定"""
    if config.grid is not None:
        storage.emit(decodable_region_curve(config.grid_values))
    else:
        storage.emit(cs_region(config.single_alpha, config.kappa_x))


def run_cs_mse(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    outcome = service.cs_mse_experiment(
        config.single_alpha, config.kappa_x, config.snr, config.n, config.trials, config.seed, kind=config.kind
    )
    storage.emit(outcome)
