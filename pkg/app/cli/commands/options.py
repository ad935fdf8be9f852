import argparse

SUPPRESS = argparse.SUPPRESS


def add_alpha(parser: argparse.ArgumentParser, help: str = "measurement ratio alpha = m/n") -> None:
    parser.add_argument("--alpha", type=str, default=SUPPRESS, help=help)


def add_kappa(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kappa", type=float, default=SUPPRESS, help="sparsity fraction kappa")


def add_grid(parser: argparse.ArgumentParser, help: str) -> None:
    parser.add_argument("--grid", type=str, default=SUPPRESS, help=help)


def add_trials(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trials", type=int, default=SUPPRESS, help="Monte Carlo trials")


def add_n(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=SUPPRESS, help="atom count")


def add_n_list(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-list", dest="n_list", type=str, default=SUPPRESS, help="comma-separated atom counts")


def add_irls(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("IRLS overrides")
    group.add_argument("--p-schedule", dest="p_schedule", type=str, default=SUPPRESS, help="comma-separated p values")
    group.add_argument("--epsilon-init", dest="epsilon_init", type=float, default=SUPPRESS)
    group.add_argument("--epsilon-decay", dest="epsilon_decay", type=float, default=SUPPRESS)
    group.add_argument("--epsilon-min", dest="epsilon_min", type=float, default=SUPPRESS)
    group.add_argument("--max-iters", dest="max_iters", type=int, default=SUPPRESS)
    group.add_argument("--convergence-tol", dest="convergence_tol", type=float, default=SUPPRESS)
    group.add_argument("--zero-tol", dest="zero_tol", type=float, default=SUPPRESS)
    group.add_argument("--energy-tol", dest="energy_tol", type=float, default=SUPPRESS)
