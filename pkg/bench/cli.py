import logging
import sys

import click
from pydantic import ValidationError

from bench.runner import ExperimentConfig, run_experiment, summary_table
from utils import configure_logging, parse_float_list, parse_int_list


def _float_list(ctx, param, value):
    if value is None:
        return None
    try:
        return parse_float_list(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        return parse_int_list(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


@click.command("stokes-bench")
@click.option("--levels", callback=_int_list, help="Mesh levels n (cells per side), e.g. 8,16,32.")
@click.option("--elements", type=click.Choice(["p2p1", "p3p2"], case_sensitive=False), default="p2p1")
@click.option("--mu", callback=_float_list, help="Viscosities, e.g. 1,1e-2,1e-4.")
@click.option("--lambda", "lam", callback=_float_list, help="Augmented Lagrangian parameters, e.g. 0,1,10.")
@click.option("--method", type=click.Choice(["method1", "method2", "projection", "velocity_only", "bmbt_only"]),
              default="method1")
@click.option("--vel-precond", default="a3x2vc", show_default=True)
@click.option("--schur-precond", default="clambdax2vc", show_default=True)
@click.option("--bmbt-mass", type=click.Choice(["lumped", "consistent_th", "consistent_2vc"]), default="lumped")
@click.option("--bmbt-precond", default="th", show_default=True)
@click.option("--case", type=click.Choice(["div_free", "non_div_free"]), default="div_free")
@click.option("--k-wave", type=float, default=None, help="Wave number of the manufactured solution (default 16*pi).")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--restart", type=int, default=200, show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--velocity-inner-tol", type=float, default=None)
@click.option("--velocity-single-pass", is_flag=True, default=False,
              help="Method 2: apply the velocity preconditioner once instead of an inner CG.")
@click.option("--inner-tol", type=float, default=None, help="Inner velocity CG threshold of method 1 (default 1e-10).")
@click.option("--operator-tol", type=float, default=None, help="Pressure mass solves inside operators (default 1e-10).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--perturbation", type=float, default=0.1, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--dump-matrix", type=click.Path(dir_okay=False), default=None)
@click.option("--dump-mesh", type=click.Path(dir_okay=False), default=None)
@click.option("--load-mesh", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--open-boundary", is_flag=True, default=False)
@click.option("--include-setup-time", is_flag=True, default=False)
@click.option("--log-level", default="INFO", show_default=True)
def main(log_level, **options):
    """Запуск серии расчётов и печать сводной таблицы."""
    configure_logging(log_level)
    payload = {key: value for key, value in options.items() if value is not None}
    payload["elements"] = payload["elements"].lower()
    try:
        config = ExperimentConfig(**payload)
    except ValidationError as exc:
        raise click.UsageError(str(exc))

    records = run_experiment(config)
    click.echo(summary_table(records))
    all_converged = bool(records) and all(r.converged for r in records)
    if not all_converged:
        logging.warning(f"{sum(not r.converged for r in records)} of {len(records)} runs did not converge")
    sys.exit(0 if all_converged else 1)


if __name__ == "__main__":
    main()
