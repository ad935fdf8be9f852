import argparse
import logging

from app.cli.commands.options import SUPPRESS, add_alpha, add_irls, add_n
from app.core.config import settings
from app.schemas.run_config import OutputFormat, RunConfig
from app.schemas.solvers import IrlsParams
from app.services.ensembles import draw_instance, export_instance_csv
from app.services.experiments import ExperimentService
from app.services.solvers import irls_min_l0
from app.services.storage_service import StorageService

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction, parents: list) -> None:
    sparsest = subparsers.add_parser("sparsest", parents=parents, help="single IRLS run on a seeded WGN instance")
    add_alpha(sparsest)
    add_n(sparsest)
    add_irls(sparsest)
    sparsest.add_argument("--export-instance", dest="export_instance", type=str, default=SUPPRESS, help="also write the instance CSV here")
    sparsest.set_defaults(handler=run_sparsest)


def run_sparsest(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    """IRLS を 1 回実行し、解 (index, value) と診断情報を書き出す"""
    params = IrlsParams.from_settings(settings, **config.irls.model_dump())
    instance = draw_instance(config.n, config.single_alpha, config.kind, config.seed)
    if config.export_instance is not None:
        export_instance_csv(instance, config.export_instance)

    solution = irls_min_l0(instance, params)
    logger.info(f"IRLS finished: {solution.status.value}, sparsity {solution.sparsity_fraction:.4f}, energy {solution.energy:.3e}")

    header = {"m": instance.m, "n": instance.n, "alpha": instance.alpha, "kind": instance.kind, "seed": instance.seed}
    if storage.format is OutputFormat.JSON:
        storage.emit({"instance": header, "irls": params, "solution": solution})
        return
    rows = [[i, float(v)] for i, v in enumerate(solution.z)]
    storage.emit(solution, columns=["index", "value"], rows=rows)
    storage.write_sidecar({"instance": header, "irls": params, "diagnostics": solution.diagnostics(), "support": solution.support})
