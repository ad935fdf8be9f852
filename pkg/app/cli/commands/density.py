import argparse

from app.cli.commands.options import SUPPRESS, add_alpha, add_grid, add_kappa, add_n
from app.core.rng import derive_rng
from app.schemas.run_config import RunConfig
from app.services import density
from app.services.experiments import ExperimentService, pdf_family
from app.services.storage_service import StorageService


def register(subparsers: argparse._SubParsersAction, parents: list) -> None:
    pdf = subparsers.add_parser("pdf", parents=parents, help="marginal density of the non-zero entries on a zeta grid")
    add_alpha(pdf, help="measurement ratio (comma list for a family at fixed kappa)")
    add_kappa(pdf)
    add_grid(pdf, "zeta grid start:stop:step")
    pdf.set_defaults(handler=run_pdf)

    sample = subparsers.add_parser("sample", parents=parents, help="draws from the marginal density")
    add_alpha(sample)
    add_kappa(sample)
    sample.add_argument("--count", type=int, default=SUPPRESS, help="number of non-zero draws")
    add_n(sample)
    sample.set_defaults(handler=run_sample)


def run_pdf(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    table = pdf_family(config.kappa, config.alpha, config.grid_values)
    extra = {"kappa": table.kappa, "alphas": table.alphas, "alpha_star": table.alpha_star, "gaps": table.gaps}
    storage.emit(table, columns=table.columns, rows=table.rows, extra=extra)


def run_sample(config: RunConfig, storage: StorageService, service: ExperimentService) -> None:
    """--n があれば κ-スパースベクトル 1 本、なければ --count 個の非ゼロ値"""
    params = density.density_params(config.kappa, config.single_alpha)
    rng = derive_rng(config.seed, "sample")
    if config.n is not None:
        values = density.sample_sparse_vector(config.n, params, rng)
        column = "value"
    else:
        values = density.sample_nonzero(params, rng, size=config.count)
        column = "zeta"

    rows = [[i, float(v)] for i, v in enumerate(values)]
    result = {"params": params, "moments": density.moments(params), "values": values}
    storage.emit(result, columns=["index", column], rows=rows, extra={"gap": params.gap, "scale": params.scale})
