import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from bench.manufactured import DEFAULT_WAVE, manufactured_case
from bench.metrics import compute_eff, compute_tau, rescale_eff
from fem_assembly.boundary import interpolate
from fem_assembly.norms import discrete_relative_error, relative_l1_error, relative_l2_error
from fem_assembly.spaces import MixedSpace
from mesh_builder.mesh import Mesh, build_unit_square_mesh, read_mesh, refine, write_mesh
from multigrid.amg import parse_mode
from sparse_ops.operations import dump_matrix_coo
from stokes_solver.methods import method1_solve, method2_solve, solve_velocity
from stokes_solver.preconditioners import (
    BmbtMass,
    SchurFamily,
    SchurPrecondKind,
    VelocityPrecondKind,
    bmbt_operator,
    solve_bmbt,
)
from stokes_solver.projection import projection_step
from stokes_solver.system import StokesSystem
from utils import make_run_id

CSV_COLUMNS = ["method", "precond", "level", "dofs", "mu", "lambda", "outer_iters", "inner_iters",
               "vel_err", "press_err", "wall_s", "eff_ms", "converged"]
METHODS = ("method1", "method2", "projection", "velocity_only", "bmbt_only")
PROCESSES = 1


class ExperimentConfig(BaseModel):
    """Параметры серии расчётов (сетки x mu x lambda)."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    levels: List[int] = Field(default_factory=lambda: [8, 16], min_length=1)
    elements: Literal["p2p1", "p3p2"] = "p2p1"
    mu: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    lam: List[float] = Field(default_factory=lambda: [0.0], min_length=1, alias="lambda")
    method: Literal["method1", "method2", "projection", "velocity_only", "bmbt_only"] = "method1"
    vel_precond: str = "a3x2vc"
    schur_precond: str = "clambdax2vc"
    tol: float = 1e-10
    restart: int = Field(default=200, ge=1)
    max_iter: int = Field(default=1000, ge=1)
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    out: Optional[str] = None
    perturbation: float = Field(default=0.1, ge=0.0, le=0.3)
    k_wave: float = DEFAULT_WAVE
    case: Literal["div_free", "non_div_free"] = "div_free"
    bmbt_mass: Literal["lumped", "consistent_th", "consistent_2vc"] = "lumped"
    bmbt_precond: str = "th"
    velocity_inner_tol: Optional[float] = None
    velocity_single_pass: bool = False
    inner_tol: Optional[float] = None
    operator_tol: Optional[float] = None
    include_setup_time: bool = False
    open_boundary: bool = False
    load_mesh: Optional[str] = None
    dump_mesh: Optional[str] = None
    dump_matrix: Optional[str] = None

    @field_validator("tol", "velocity_inner_tol", "inner_tol", "operator_tol")
    @classmethod
    def _tol_range(cls, v, info):
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"{info.field_name} must lie in (0, 1), got {v}")
        return v

    @field_validator("levels")
    @classmethod
    def _levels_valid(cls, v):
        if any(n < 0 for n in v):
            raise ValueError(f"levels must be non-negative, got {v}")
        return v

    @model_validator(mode="after")
    def _levels_are_mesh_sizes(self):
        # без load_mesh уровни - число делений стороны квадрата
        if not self.load_mesh and any(n < 2 for n in self.levels):
            raise ValueError(f"levels must be >= 2 unless load_mesh is given, got {self.levels}")
        return self

    @field_validator("mu")
    @classmethod
    def _mu_positive(cls, v):
        if any(m <= 0 for m in v):
            raise ValueError(f"mu values must be positive, got {v}")
        return v

    @field_validator("lam")
    @classmethod
    def _lam_non_negative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError(f"lambda values must be non-negative, got {v}")
        return v

    @field_validator("vel_precond")
    @classmethod
    def _vel_token(cls, v):
        VelocityPrecondKind.parse(v)
        return v.lower()

    @field_validator("schur_precond")
    @classmethod
    def _schur_token(cls, v):
        SchurPrecondKind.parse(v)
        return v.lower()

    @field_validator("bmbt_precond")
    @classmethod
    def _bmbt_token(cls, v):
        parse_mode(v)
        return v.lower()

    @property
    def pressure_degree(self) -> int:
        return 1 if self.elements == "p2p1" else 2


@dataclass
class ExperimentRecord:
    run_id: str
    method: str
    precond: str
    level: int
    dofs: int
    mu: float
    lam: float
    outer_iters: int = 0
    inner_iters: int = 0
    vel_err: float = float("nan")
    press_err: float = float("nan")
    wall_s: float = float("nan")
    eff_ms: float = float("nan")
    eff_rescaled_ms: float = float("nan")
    converged: bool = False
    error: str = ""
    history: List[float] = field(default_factory=list, repr=False)

    def row(self) -> dict:
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return {col: data[col] for col in CSV_COLUMNS}


def precond_label(config: ExperimentConfig) -> str:
    if config.method == "method1":
        return config.schur_precond
    if config.method == "method2":
        return f"{config.schur_precond}+{config.vel_precond}"
    if config.method == "velocity_only":
        return config.vel_precond
    if config.method == "bmbt_only":
        return f"bmbt-{config.bmbt_mass}-{config.bmbt_precond}"
    return "projection"


def required_hierarchies(config: ExperimentConfig, lam: float) -> List[str]:
    """Иерархии AMG, которые нужны методу (строятся до начала замера времени)."""
    names = []
    schur = SchurPrecondKind.parse(config.schur_precond)
    velocity = VelocityPrecondKind.parse(config.vel_precond)
    schur_names = {
        SchurFamily.C: ["mass_pressure", "mass_velocity", "shifted_pressure_laplacian"],
        SchurFamily.C_LAMBDA: ["mass_pressure", "shifted_pressure_laplacian"],
        SchurFamily.C_DELTA: ["mass_pressure", "pressure_laplacian"],
    }[schur.family]
    if config.method == "method1":
        names = ["velocity_a3"] + schur_names
    elif config.method == "method2":
        names = [f"velocity_{velocity.matrix}"] + schur_names
    elif config.method == "projection":
        names = ["velocity_a3", "pressure_laplacian", "mass_pressure"]
    elif config.method == "velocity_only":
        names = [f"velocity_{velocity.matrix}"]
    else:
        names = ["shifted_pressure_laplacian"]
        if config.bmbt_mass != "lumped":
            names.append("mass_velocity")
    if lam > 0 and config.method != "bmbt_only":
        names.append("mass_pressure")
    return list(dict.fromkeys(names))


def build_meshes(config: ExperimentConfig) -> Dict[int, Mesh]:
    """
    Сетки для всех уровней. Уровни вида n0 * 2^j получаются измельчением самой грубой
    (вложенное семейство); при load_mesh уровни означают число измельчений.
    """
    meshes = {}
    if config.load_mesh:
        base = read_mesh(config.load_mesh)
        for count in sorted(set(config.levels)):
            mesh = base
            for _ in range(count):
                mesh = refine(mesh)
            meshes[count] = mesh
        return meshes

    coarsest = min(config.levels)
    base = build_unit_square_mesh(coarsest, config.perturbation, config.seed, config.open_boundary)
    for n in sorted(set(config.levels)):
        ratio = n / coarsest
        steps = int(round(math.log2(ratio))) if ratio >= 1 else -1
        if steps >= 0 and coarsest * 2 ** steps == n:
            mesh = base
            for _ in range(steps):
                mesh = refine(mesh)
        else:
            mesh = build_unit_square_mesh(n, config.perturbation, config.seed, config.open_boundary)
        meshes[n] = mesh
    return meshes


def _velocity_block_options(config: ExperimentConfig) -> dict:
    if config.velocity_single_pass:
        return {"velocity_inner_tol": None}
    if config.velocity_inner_tol is not None:
        return {"velocity_inner_tol": config.velocity_inner_tol}
    return {}


def _solve_one(config: ExperimentConfig, record: ExperimentRecord, space: MixedSpace, mu: float, lam: float):
    tau = compute_tau(space.velocity_dofs.n_nodes)
    method = config.method
    coupled = method in ("method1", "method2", "projection")
    case = manufactured_case(kind="div_free" if coupled else config.case, k_wave=config.k_wave, mu=mu, lam=lam,
                             tau=tau, with_pressure=coupled)
    boundary = None if method == "bmbt_only" else case.velocity
    tolerances = {"operator_tol": config.operator_tol} if config.operator_tol is not None else {}
    system = StokesSystem.build(space, tau=tau, mu=mu, lam=lam, boundary=boundary, **tolerances)
    if not config.include_setup_time:
        system.prepare(*required_hierarchies(config, lam))

    if method == "bmbt_only":
        mass = BmbtMass(config.bmbt_mass)
        exact = interpolate(case.pressure, space.pressure_dofs)
        rhs = bmbt_operator(system, mass).matvec(exact)
        start = time.perf_counter()
        x, report = solve_bmbt(system, rhs, mass, rel_tol=config.tol, precond_mode=parse_mode(config.bmbt_precond),
                               restart=config.restart, max_iter=config.max_iter)
        record.wall_s = time.perf_counter() - start
        record.outer_iters = report.iterations
        record.press_err = discrete_relative_error(x, system.constrain_pressure(exact), space, power=1)
        record.converged = report.converged
        record.history = report.relative_residuals
        return

    f_mod = system.velocity_rhs(case.forcing)
    start = time.perf_counter()
    if method == "velocity_only":
        u, report = solve_velocity(system, system.augmented_rhs(f_mod, lifted=True),
                                   kind=VelocityPrecondKind.parse(config.vel_precond), rel_tol=config.tol,
                                   max_iter=config.max_iter)
        record.wall_s = time.perf_counter() - start
        record.outer_iters = report.iterations
        record.vel_err = relative_l2_error(u, case.velocity, space)
        record.converged = report.converged
        record.history = report.relative_residuals
        return

    if method == "method1":
        u, p, report = method1_solve(system, f_mod, SchurPrecondKind.parse(config.schur_precond), rel_tol=config.tol,
                                     inner_tol=config.inner_tol, restart=config.restart, max_iter=config.max_iter)
    elif method == "method2":
        u, p, report = method2_solve(system, f_mod, SchurPrecondKind.parse(config.schur_precond),
                                     VelocityPrecondKind.parse(config.vel_precond), rel_tol=config.tol,
                                     restart=config.restart, max_iter=config.max_iter,
                                     **_velocity_block_options(config))
    else:
        u, p, report = projection_step(system, f_mod, rel_tol=config.tol, max_iter=config.max_iter)
    record.wall_s = time.perf_counter() - start
    record.outer_iters = report.outer.iterations
    record.inner_iters = report.inner_iterations
    record.vel_err = relative_l2_error(u, case.velocity, space)
    record.press_err = relative_l2_error(p, case.pressure, space)
    record.converged = report.converged
    record.history = report.outer.relative_residuals


def run_single(config: ExperimentConfig, level: int, mesh: Mesh, mu: float, lam: float) -> ExperimentRecord:
    space = MixedSpace.taylor_hood(mesh, pressure_degree=config.pressure_degree)
    precond = precond_label(config)
    record = ExperimentRecord(run_id=make_run_id(config.method, precond, level, mu, lam), method=config.method,
                              precond=precond, level=level, dofs=space.n_dofs, mu=mu, lam=lam)
    try:
        _solve_one(config, record, space, mu, lam)
        record.eff_ms = compute_eff(record.wall_s, PROCESSES, record.dofs)
        record.eff_rescaled_ms = rescale_eff(record.eff_ms, config.tol)
        logging.info(f"{record.run_id}: {record.outer_iters} outer / {record.inner_iters} inner iterations, "
                     f"{record.wall_s:.3f}s, vel_err={record.vel_err:.3e}, press_err={record.press_err:.3e}")
    except Exception as exc:
        record.converged = False
        record.error = f"{type(exc).__name__}: {exc}"
        logging.error(f"Run {record.run_id} failed: {record.error}")
    return record


def _dump_artifacts(config: ExperimentConfig, meshes: Dict[int, Mesh]):
    first = min(meshes)
    if config.dump_mesh:
        write_mesh(meshes[first], config.dump_mesh)
    if config.dump_matrix:
        space = MixedSpace.taylor_hood(meshes[first], pressure_degree=config.pressure_degree)
        tau = compute_tau(space.velocity_dofs.n_nodes)
        system = StokesSystem.build(space, tau=tau, mu=config.mu[0], lam=config.lam[0])
        dump_matrix_coo(system.velocity_matrix, f"{config.dump_matrix}.A.coo")
        dump_matrix_coo(system.divergence, f"{config.dump_matrix}.B.coo")


def run_experiment(config: ExperimentConfig) -> List[ExperimentRecord]:
    """Одна запись на каждую тройку (уровень, mu, lambda); ошибки отдельных запусков не прерывают серию."""
    meshes = build_meshes(config)
    _dump_artifacts(config, meshes)
    tasks = [(level, meshes[level], mu, lam) for level in sorted(meshes) for mu in config.mu for lam in config.lam]
    logging.info(f"Experiment {config.method}: {len(tasks)} runs on levels {sorted(meshes)}")

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(lambda t: run_single(config, *t), tasks))
    else:
        records = [run_single(config, *t) for t in tasks]

    if config.out and any(not r.error for r in records):
        emit_csv(records, config.out)
    return records


def records_frame(records: List[ExperimentRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.row() for r in records], columns=CSV_COLUMNS)


def emit_csv(records: List[ExperimentRecord], path) -> Path:
    """CSV с одной строкой на запуск и файлы истории невязок <path>.hist.<run_id>.csv."""
    path = Path(path)
    records_frame(records).to_csv(path, index=False)
    for record in records:
        if record.history:
            history = pd.DataFrame({"iteration": np.arange(len(record.history)), "residual": record.history})
            history.to_csv(f"{path}.hist.{record.run_id}.csv", index=False)
    logging.info(f"Wrote {len(records)} records to {path}")
    return path


def summary_table(records: List[ExperimentRecord]) -> str:
    """Сводка для консоли: столбцы CSV плюс Eff, приведённая к порогу 1e-10."""
    frame = records_frame(records)
    frame["eff_1e-10_ms"] = [r.eff_rescaled_ms for r in records]
    failed = [r for r in records if r.error]
    text = frame.to_string(index=False)
    if failed:
        text += "\n\nFailed runs:\n" + "\n".join(f"  {r.run_id}: {r.error}" for r in failed)
    return text
