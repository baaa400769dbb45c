import numpy as np
import pytest
import scipy.sparse as sp

from krylov.operators import as_operator, identity_operator, linearity_defect, make_operator
from krylov.solvers import KrylovBreakdown, cg, gmres
from multigrid.amg import FixedVCycles, ToThreshold, amg_operator, amg_setup
from sparse_ops.operations import dense_pinv, dense_solve, densify


def _spd(rng, n=40):
    q = rng.standard_normal((n, n))
    return q @ q.T + n * np.eye(n)


def test_cg_identity_converges_in_one_step():
    x, report = cg(identity_operator(5), None, np.arange(1.0, 6.0))
    assert report.iterations == 1
    assert report.converged
    np.testing.assert_allclose(x, np.arange(1.0, 6.0))


def test_cg_diagonal():
    x, report = cg(sp.diags([1.0, 2.0, 3.0]).tocsr(), None, np.array([1.0, 2.0, 3.0]))
    assert report.iterations <= 3
    assert report.final_residual <= 1e-14
    np.testing.assert_allclose(x, 1.0, rtol=1e-14)


def test_cg_iteration_bound_and_true_residual(rng):
    a = _spd(rng)
    b = rng.standard_normal(40)
    x, report = cg(a, None, b, rel_tol=1e-12)
    assert report.converged
    assert report.iterations <= 40 + 5
    recomputed = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert recomputed <= 1e-12
    assert report.final_residual == pytest.approx(recomputed, rel=1e-6, abs=10 * np.finfo(float).eps)
    assert report.relative_residuals[0] == 1.0
    assert len(report.relative_residuals) == report.iterations + 1


def test_cg_zero_rhs():
    x, report = cg(identity_operator(4), None, np.zeros(4))
    assert report.converged and report.iterations == 0
    np.testing.assert_array_equal(x, 0.0)


def test_cg_with_amg_matches_dense_solve(small_system, rng):
    system, _ = small_system
    precond = amg_operator(amg_setup(system.tilde_matrix("a3"), strong_threshold=0.1, block_size=2), FixedVCycles(2))
    b = rng.standard_normal(system.n_velocity)
    x, report = cg(system.velocity_matrix, precond, b, rel_tol=1e-12)
    assert report.converged
    oracle = dense_solve(system.velocity_matrix, b)
    assert np.linalg.norm(x - oracle) <= 1e-8 * np.linalg.norm(oracle)


def test_cg_rejects_threshold_preconditioner_unless_flexible(small_system, rng):
    system, _ = small_system
    precond = amg_operator(amg_setup(system.tilde_matrix("a3"), block_size=2), ToThreshold(1e-6))
    b = rng.standard_normal(system.n_velocity)
    with pytest.raises(ValueError):
        cg(system.velocity_matrix, precond, b)
    x, report = cg(system.velocity_matrix, precond, b, rel_tol=1e-10, flexible=True)
    assert report.converged and report.flexible
    assert report.method == "fcg"


def test_cg_breakdown_on_indefinite_operator():
    with pytest.raises(KrylovBreakdown) as info:
        cg(sp.diags([1.0, -1.0]).tocsr(), None, np.array([1.0, 1.0]))
    assert info.value.curvature <= 0


def test_cg_reports_non_convergence(rng):
    a = _spd(rng)
    _, report = cg(a, None, rng.standard_normal(40), rel_tol=1e-14, max_iter=2)
    assert not report.converged
    assert report.iterations == 2


def test_gmres_rotation():
    x, report = gmres(np.array([[0.0, 1.0], [-1.0, 0.0]]), None, np.array([1.0, 0.0]))
    assert report.iterations <= 2
    assert report.converged
    np.testing.assert_allclose(x, [0.0, 1.0], atol=1e-14)


def test_gmres_with_exact_inverse_takes_one_iteration(rng):
    a = rng.standard_normal((30, 30)) + 10 * np.eye(30)
    inverse = np.linalg.inv(a)
    x, report = gmres(a, inverse, rng.standard_normal(30))
    assert report.iterations == 1
    assert report.converged
    assert not report.flexible


def test_gmres_history_is_monotone_and_true_residual_reported(rng):
    a = rng.standard_normal((50, 50)) + 8 * np.eye(50)
    b = rng.standard_normal(50)
    x, report = gmres(a, None, b, rel_tol=1e-10, restart=200)
    assert report.converged
    history = np.array(report.relative_residuals)
    assert np.all(np.diff(history) <= 1e-14)
    recomputed = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert report.final_residual == pytest.approx(recomputed, rel=1e-6, abs=10 * np.finfo(float).eps)


def test_right_preconditioning_minimizes_true_residual(rng):
    a = rng.standard_normal((25, 25)) + 6 * np.eye(25)
    precond = np.diag(1.0 / np.diag(a))
    b = rng.standard_normal(25)
    x, report = gmres(a, precond, b, rel_tol=1e-10)
    assert report.converged
    assert np.linalg.norm(b - a @ x) / np.linalg.norm(b) <= 1e-10


def test_restarted_gmres_converges(rng):
    a = rng.standard_normal((60, 60)) + 9 * np.eye(60)
    b = rng.standard_normal(60)
    x, report = gmres(a, None, b, rel_tol=1e-10, restart=5, max_iter=2000)
    assert report.converged
    assert report.restarts >= 1
    assert np.linalg.norm(b - a @ x) <= 1e-10 * np.linalg.norm(b)


def test_gmres_on_singular_consistent_system(small_system, rng):
    system, _ = small_system
    laplacian = system.pressure_laplacian
    b = system.constrain_pressure(rng.standard_normal(system.n_pressure))
    x, report = gmres(laplacian, None, b, rel_tol=1e-10, project=system.constrain_pressure)
    assert report.converged
    assert np.linalg.norm(b - laplacian @ x) <= 1e-10 * np.linalg.norm(b)
    oracle = dense_pinv(laplacian) @ b
    assert np.linalg.norm(x - oracle) <= 1e-6 * np.linalg.norm(oracle)


def test_gmres_goes_flexible_for_nonlinear_preconditioner(small_system, rng):
    system, _ = small_system
    precond = amg_operator(amg_setup(system.tilde_matrix("a3"), block_size=2), ToThreshold(1e-3))
    b = rng.standard_normal(system.n_velocity)
    x, report = gmres(system.velocity_matrix, precond, b, rel_tol=1e-10)
    assert report.flexible and report.method == "fgmres"
    assert report.converged


def test_operator_helpers(rng):
    matrix = sp.random(20, 20, density=0.3, random_state=2, format="csr")
    sym = as_operator(matrix + matrix.T)
    assert sym.symmetric and sym.fixed
    assert as_operator(sym) is sym
    assert not as_operator(matrix).symmetric
    assert linearity_defect(as_operator(matrix), rng) <= 1e-14
    with pytest.raises(ValueError):
        as_operator(sp.csr_matrix((3, 4)))

    squares = make_operator(20, lambda v: v ** 2, fixed=False, name="square")
    assert squares.name == "square" and not squares.fixed
    assert linearity_defect(squares, rng) > 1e-3
    np.testing.assert_allclose(densify(sp.identity(3)) @ np.ones(3), identity_operator(3).matvec(np.ones(3)))


def test_report_summary():
    _, report = cg(identity_operator(3), None, np.ones(3))
    summary = report.summary()
    assert summary["method"] == "cg"
    assert summary["converged"] is True
