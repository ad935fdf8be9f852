import argparse

from app.cli.commands.options import SUPPRESS, add_alpha, add_irls, add_kappa, add_n, add_n_list, add_trials
from app.core.config import settings
from app.schemas.run_config import RunConfig
from app.schemas.solvers import IrlsParams
from app.services.experiments import ExperimentService
from app.services.storage_service import StorageService


def register(subparsers: argparse._SubParsersAction, parents: list) -> None:
    extrapolate = subparsers.add_parser("extrapolate", parents=parents, help="IRLS sweep over n with a quadratic fit in 1/n")
    add_alpha(extrapolate)
    add_n_list(extrapolate)
    add_trials(extrapolate)
    extrapolate.add_argument("--weighted", action="store_true", default=SUPPRESS, help="weight the quadratic fit by 1/SE")
    add_irls(extrapolate)
    extrapolate.set_defaults(handler=run_extrapolate)

    qq = subparsers.add_parser("qq", parents=parents, help="distribution of w = Dz/sqrt(n) against normal laws")
    add_alpha(qq)
    add_kappa(qq)
    add_n(qq)
    add_trials(qq)
    qq.add_argument("--points", type=int, default=SUPPRESS, help="rows of the QQ table")
    qq.set_defaults(handler=run_qq)

    energy = subparsers.add_parser("energy-scan", parents=parents, help="brute-force minimal energy against the converse law")
    add_alpha(energy)
    add_kappa(energy)
    add_n_list(energy)
    add_trials(energy)
    energy.set_defaults(handler=run_energy_scan)


def run_extrapolate(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    params = IrlsParams.from_settings(settings, **config.irls.model_dump())
    report = service.sweep_min_sparsity(
        config.single_alpha, config.n_list, config.trials, params, config.seed, weighted=config.weighted, kind=config.kind
    )
    columns = ["n", "m", "mean_sparsity", "std_error", "trials", "excluded", "ill_conditioned", "not_converged", "fit_residual"]
    rows = [
        [s.n, s.m, s.mean_sparsity, s.std_error, s.trials, s.excluded, s.ill_conditioned, s.not_converged, r]
        for s, r in zip(report.per_n, report.fit_residuals)
    ]
    extra = {
        "quadratic_coeffs": report.quadratic_coeffs,
        "kappa_extrapolated": report.kappa_extrapolated,
        "kappa_theory": report.kappa_theory,
        "relative_gap": report.relative_gap,
        "excluded_n": report.excluded_n,
    }
    storage.emit(report, columns=columns, rows=rows, extra=extra)


def run_qq(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    report = service.qq_experiment(
        config.single_alpha, config.kappa, config.n, config.trials, config.seed, points=config.points, kind=config.kind
    )
    columns = ["probability", "normal_quantile", "scaled_quantile", "empirical_quantile"]
    rows = [[p.probability, p.normal_quantile, p.scaled_quantile, p.empirical_quantile] for p in report.points]
    extra = report.model_dump(exclude={"points"})
    storage.emit(report, columns=columns, rows=rows, extra=extra)


def run_energy_scan(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    report = service.converse_energy_experiment(
        config.single_alpha, config.kappa, config.n_list, config.trials, config.seed, kind=config.kind
    )
    storage.emit(report, *_rows(report.rows))


def _rows(models: list) -> tuple:
    if not models:
        return [], []
    columns = list(type(models[0]).model_fields)
    return columns, [[getattr(model, c) for c in columns] for model in models]
