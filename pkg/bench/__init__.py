from bench.manufactured import DEFAULT_WAVE, ManufacturedCase, manufactured_case
from bench.metrics import compute_eff, compute_tau, rescale_eff
from bench.runner import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentRecord,
    emit_csv,
    records_frame,
    run_experiment,
    run_single,
    summary_table,
)

__all__ = [
    "DEFAULT_WAVE",
    "ManufacturedCase",
    "manufactured_case",
    "compute_eff",
    "compute_tau",
    "rescale_eff",
    "CSV_COLUMNS",
    "ExperimentConfig",
    "ExperimentRecord",
    "emit_csv",
    "records_frame",
    "run_experiment",
    "run_single",
    "summary_table",
]
