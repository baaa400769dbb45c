import math

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner
from pydantic import ValidationError

import bench.runner as runner
from bench.cli import main
from bench.manufactured import manufactured_case
from bench.metrics import compute_eff, compute_tau, rescale_eff
from bench.runner import (
    CSV_COLUMNS,
    ExperimentConfig,
    build_meshes,
    emit_csv,
    records_frame,
    precond_label,
    required_hierarchies,
    run_experiment,
    summary_table,
)
from mesh_builder.mesh import build_unit_square_mesh, read_mesh, write_mesh
from utils import make_run_id, parse_float_list, parse_int_list

from conftest import TEST_WAVE

STEP = 1e-4


def _points(rng, count=100):
    return rng.uniform(0.05, 0.95, size=(2, count))


def _velocity_only(**overrides):
    options = dict(levels=[4], method="velocity_only", k_wave=TEST_WAVE)
    options.update(overrides)
    return ExperimentConfig(**options)


def _laplacian(u, x, y):
    return (u(x + STEP, y) + u(x - STEP, y) + u(x, y + STEP) + u(x, y - STEP) - 4.0 * u(x, y)) / STEP ** 2


def _finite_divergence(u, x, y):
    return ((u(x + STEP, y)[0] - u(x - STEP, y)[0]) + (u(x, y + STEP)[1] - u(x, y - STEP)[1])) / (2 * STEP)


def test_div_free_case(rng):
    case = manufactured_case("div_free", k_wave=TEST_WAVE, mu=0.3, tau=0.1)
    x, y = _points(rng)
    assert np.abs(_finite_divergence(case.velocity, x, y)).max() <= 1e-5 * TEST_WAVE
    np.testing.assert_array_equal(case.divergence(x, y), 0.0)
    assert abs(case.pressure(0.3, 0.3)) == 0.0

    expected = case.velocity(x, y) / case.tau - case.mu * _laplacian(case.velocity, x, y)
    dp = TEST_WAVE * np.cos(TEST_WAVE * (x - y))
    expected += np.stack([dp, -dp])
    np.testing.assert_allclose(case.forcing(x, y), expected, rtol=1e-4, atol=1e-4 * np.abs(expected).max())


def test_non_div_free_case(rng):
    case = manufactured_case("non_div_free", k_wave=TEST_WAVE, mu=0.5, lam=2.0, tau=0.2, with_pressure=False)
    x, y = _points(rng)
    np.testing.assert_allclose(_finite_divergence(case.velocity, x, y), case.divergence(x, y),
                               atol=1e-5 * TEST_WAVE ** 2)
    grad_div = np.stack([
        (case.divergence(x + STEP, y) - case.divergence(x - STEP, y)) / (2 * STEP),
        (case.divergence(x, y + STEP) - case.divergence(x, y - STEP)) / (2 * STEP),
    ])
    expected = (case.velocity(x, y) / case.tau - case.mu * _laplacian(case.velocity, x, y)
                - case.mu * (1.0 + case.lam) * grad_div)
    np.testing.assert_allclose(case.forcing(x, y), expected, rtol=1e-4, atol=1e-4 * np.abs(expected).max())


def test_manufactured_case_validation():
    with pytest.raises(ValueError):
        manufactured_case("vortex")
    with pytest.raises(ValueError):
        manufactured_case("non_div_free", with_pressure=True)
    velocity, pressure, forcing = manufactured_case().fields()
    assert velocity(0.0, 0.0).shape == (2,)


def test_tau_and_efficiency():
    assert compute_tau(4) == 0.5
    assert compute_tau(118785) == pytest.approx(2.9014e-3, rel=1e-4)
    assert compute_eff(1.046, 2, 267427) == pytest.approx(0.0078, rel=1e-2)
    assert compute_eff(0.479, 2, 267427) == pytest.approx(0.0036, rel=1e-2)
    assert compute_eff(1.0, 1, 1000) == 1.0
    assert rescale_eff(1.0, 1e-5) == pytest.approx(2.0)
    assert rescale_eff(0.3, 1e-10) == pytest.approx(0.3)
    for bad in ((-1.0, 1, 10), (1.0, 0, 10), (1.0, 1, 0)):
        with pytest.raises(ValueError):
            compute_eff(*bad)
    with pytest.raises(ValueError):
        compute_tau(0)
    with pytest.raises(ValueError):
        rescale_eff(1.0, 1.0)


@pytest.mark.parametrize("options", [
    {"tol": 0.0},
    {"tol": 1.5},
    {"mu": [0.0]},
    {"lambda": [-1.0]},
    {"levels": []},
    {"levels": [1]},
    {"levels": [0, 4]},
    {"inner_tol": 0.0},
    {"operator_tol": 1.0},
    {"vel_precond": "a9x2vc"},
    {"schur_precond": "cx"},
    {"bmbt_precond": "fast"},
    {"perturbation": 0.5},
    {"method": "method3"},
    {"colour": "red"},
])
def test_config_rejects_invalid_values(options):
    with pytest.raises(ValidationError):
        ExperimentConfig(**options)


def test_config_defaults_and_aliases():
    config = ExperimentConfig(**{"lambda": [0.0, 1.0], "schur_precond": "CLAMBDAXTH"})
    assert config.lam == [0.0, 1.0]
    assert config.schur_precond == "clambdaxth"
    assert config.levels == [8, 16]
    assert config.pressure_degree == 1
    assert ExperimentConfig(elements="p3p2").pressure_degree == 2
    assert config.model_dump(by_alias=True)["lambda"] == [0.0, 1.0]


def test_precond_labels_and_hierarchies():
    assert precond_label(ExperimentConfig(method="method2")) == "clambdax2vc+a3x2vc"
    assert precond_label(ExperimentConfig(method="bmbt_only")) == "bmbt-lumped-th"
    assert precond_label(ExperimentConfig(method="projection")) == "projection"
    assert required_hierarchies(ExperimentConfig(), 1.0) == ["velocity_a3", "mass_pressure",
                                                             "shifted_pressure_laplacian"]
    assert "pressure_laplacian" in required_hierarchies(ExperimentConfig(schur_precond="cdeltax2vc"), 0.0)
    assert required_hierarchies(ExperimentConfig(method="bmbt_only", bmbt_mass="consistent_th"), 1.0) == [
        "shifted_pressure_laplacian", "mass_velocity"]


def test_levels_below_two_need_a_mesh_file(tmp_path):
    with pytest.raises(ValidationError, match="load_mesh"):
        ExperimentConfig(levels=[1], method="projection")
    path = tmp_path / "base.mesh"
    write_mesh(build_unit_square_mesh(2), path)
    assert ExperimentConfig(levels=[0, 1], load_mesh=str(path)).levels == [0, 1]


def test_build_meshes_nests_power_of_two_levels():
    meshes = build_meshes(ExperimentConfig(levels=[8, 4, 6]))
    assert sorted(meshes) == [4, 6, 8]
    assert meshes[8].n_triangles == 4 * meshes[4].n_triangles
    np.testing.assert_array_equal(meshes[8].vertices[:meshes[4].n_vertices], meshes[4].vertices)
    assert meshes[6].n_triangles == 2 * 36


def test_build_meshes_from_file(tmp_path):
    path = tmp_path / "base.mesh"
    write_mesh(build_unit_square_mesh(4, perturbation=0.1, seed=2), path)
    meshes = build_meshes(ExperimentConfig(levels=[0, 1], load_mesh=str(path)))
    assert meshes[0].n_triangles == 32
    assert meshes[1].n_triangles == 128


def test_velocity_only_experiment():
    records = run_experiment(_velocity_only(**{"lambda": [0.0, 1.0]}))
    assert len(records) == 2
    for record in records:
        assert record.converged, record.error
        assert record.dofs == 2 * 81 + 25
        assert record.outer_iters > 0
        assert record.vel_err < 0.5
        assert math.isnan(record.press_err)
        assert record.eff_ms == pytest.approx(record.wall_s * 1000.0 / record.dofs)
        assert record.history[0] == 1.0


def test_experiment_is_deterministic_across_threads():
    config = _velocity_only(**{"lambda": [0.0, 1.0], "mu": [1.0, 1e-2]})
    serial = run_experiment(config)
    threaded = run_experiment(config.model_copy(update={"threads": 2}))
    assert [r.run_id for r in serial] == [r.run_id for r in threaded]
    assert [r.outer_iters for r in serial] == [r.outer_iters for r in threaded]
    assert [r.vel_err for r in threaded] == pytest.approx([r.vel_err for r in serial], rel=1e-10)


def test_bmbt_only_experiment():
    records = run_experiment(ExperimentConfig(levels=[4], method="bmbt_only", k_wave=TEST_WAVE))
    record = records[0]
    assert record.converged
    assert record.dofs == 2 * 81 + 25
    assert record.press_err <= 1e-8
    assert math.isnan(record.vel_err)


@pytest.mark.parametrize("method", ["method1", "method2", "projection"])
def test_coupled_experiments(method):
    config = ExperimentConfig(levels=[4], method=method, k_wave=TEST_WAVE, **{"lambda": [1.0]})
    record = run_experiment(config)[0]
    assert record.converged, record.error
    assert record.dofs == 2 * 81 + 25
    assert np.isfinite(record.vel_err) and np.isfinite(record.press_err)
    if method != "projection":
        assert record.inner_iters > 0


def test_tolerance_knobs_reach_the_solver(monkeypatch):
    seen = []
    original = runner.method1_solve

    def recording(system, f_mod, kind, **kwargs):
        seen.append((kwargs["inner_tol"], system.operator_tol))
        return original(system, f_mod, kind, **kwargs)

    monkeypatch.setattr(runner, "method1_solve", recording)
    base = dict(levels=[4], method="method1", k_wave=TEST_WAVE)
    assert run_experiment(ExperimentConfig(**base))[0].converged
    assert run_experiment(ExperimentConfig(inner_tol=1e-12, operator_tol=1e-13, **base))[0].converged
    assert seen == [(None, 1e-10), (1e-12, 1e-13)]


def test_rescaled_efficiency_in_summary():
    config = _velocity_only(tol=1e-5)
    record = run_experiment(config)[0]
    assert record.eff_rescaled_ms == pytest.approx(2.0 * record.eff_ms)
    assert "eff_1e-10_ms" in summary_table([record])
    assert "eff_1e-10_ms" not in records_frame([record]).columns


def test_failed_run_is_recorded(monkeypatch, tmp_path):
    def broken(*args, **kwargs):
        raise RuntimeError("factorization exploded")

    monkeypatch.setattr(runner, "_solve_one", broken)
    out = tmp_path / "results.csv"
    records = run_experiment(_velocity_only(out=str(out)))
    assert not records[0].converged
    assert "RuntimeError" in records[0].error
    assert not out.exists()
    assert "Failed runs" in summary_table(records)


def test_emit_csv(tmp_path):
    records = run_experiment(_velocity_only())
    path = emit_csv(records, tmp_path / "results.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == CSV_COLUMNS
    frame = pd.read_csv(path)
    assert frame.loc[0, "eff_ms"] == pytest.approx(frame.loc[0, "wall_s"] * 1000.0 / frame.loc[0, "dofs"])
    history = pd.read_csv(f"{path}.hist.{records[0].run_id}.csv")
    assert list(history.columns) == ["iteration", "residual"]
    assert len(history) == records[0].outer_iters + 1


def test_dump_artifacts(tmp_path):
    prefix = tmp_path / "system"
    mesh_path = tmp_path / "mesh.txt"
    run_experiment(_velocity_only(dump_matrix=str(prefix), dump_mesh=str(mesh_path)))
    assert (tmp_path / "system.A.coo").exists()
    assert (tmp_path / "system.B.coo").exists()
    assert read_mesh(mesh_path).n_triangles == 32


def test_cli_runs_and_writes_csv(tmp_path):
    out = tmp_path / "cli.csv"
    result = CliRunner().invoke(main, ["--levels", "4", "--method", "velocity_only", "--k-wave", str(TEST_WAVE),
                                       "--lambda", "0,1", "--out", str(out), "--log-level", "WARNING"])
    assert result.exit_code == 0, result.output
    assert "velocity_only" in result.output
    assert len(pd.read_csv(out)) == 2


@pytest.mark.parametrize("args", [["--tol", "2"], ["--levels", "4,x"], ["--levels", "1"], ["--mu", "0"],
                                  ["--vel-precond", "a3"], ["--inner-tol", "0"]])
def test_cli_rejects_bad_options(args):
    result = CliRunner().invoke(main, args)
    assert result.exit_code == 2


def test_make_run_id():
    assert make_run_id("method1", "cdeltaxth,2vc", 16, 0.01, 1.0) == "method1-cdeltaxth_2vc-n16-mu0.01-lam1"


def test_parse_lists():
    assert parse_float_list("1, 1e-2;1e-4") == [1.0, 0.01, 1e-4]
    assert parse_float_list([1, 2]) == [1.0, 2.0]
    assert parse_int_list("8,16,32") == [8, 16, 32]
    for bad in ("", "1.5", "a"):
        with pytest.raises(ValueError):
            parse_int_list(bad)
