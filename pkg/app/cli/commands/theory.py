import argparse
import logging

from app.cli.commands.options import SUPPRESS, add_alpha, add_grid, add_kappa, add_n_list, add_trials
from app.core.config import settings
from app.schemas.run_config import RunConfig
from app.schemas.solvers import IrlsParams
from app.services import experiments as experiment_tables
from app.services.experiments import ExperimentService
from app.services.storage_service import StorageService
from app.services.theory import alpha_star, kappa_star, min_energy

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction, parents: list) -> None:
    threshold = subparsers.add_parser("threshold", parents=parents, help="kappa*_alpha and/or alpha*_kappa")
    add_alpha(threshold)
    add_kappa(threshold)
    threshold.set_defaults(handler=run_threshold)

    curve = subparsers.add_parser("curve", parents=parents, help="threshold curve kappa*_alpha over an alpha grid")
    add_grid(curve, "alpha grid start:stop:step inside (0, 1]")
    curve.add_argument("--simulate-alphas", dest="simulate_alphas", type=str, default=SUPPRESS, help="comma-separated alphas to extrapolate by IRLS")
    add_n_list(curve)
    add_trials(curve)
    curve.add_argument("--weighted", action="store_true", default=SUPPRESS, help="weight the quadratic fit by 1/SE")
    curve.set_defaults(handler=run_curve)


def run_threshold(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    """閾値を計算する

    --alpha gives {alpha, xi, kappa_star}, --kappa gives {kappa, xi, alpha_star}
    and both together give the minimal-energy law at (alpha, kappa).
    """
    alpha = config.single_alpha
    if alpha is not None and config.kappa is not None:
        storage.emit(min_energy(alpha, config.kappa))
    elif alpha is not None:
        point = kappa_star(alpha)
        storage.emit({"alpha": point.alpha, "xi": point.xi, "kappa_star": point.kappa_star})
    else:
        point = alpha_star(config.kappa)
        storage.emit({"kappa": point.kappa, "xi": point.xi, "alpha_star": point.alpha_star})


def run_curve(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    if config.simulate_alphas:
        params = IrlsParams.from_settings(settings, **config.irls.model_dump())
        rows = service.simulated_threshold_curve(
            config.simulate_alphas, config.n_list, config.trials, params, config.seed, config.weighted, config.kind
        )
    else:
        rows = experiment_tables.threshold_curve(config.grid_values)
    storage.emit(rows)
