import numpy as np
import pytest

from bench.manufactured import manufactured_case
from bench.metrics import compute_tau
from fem_assembly.spaces import MixedSpace
from mesh_builder.mesh import DIRICHLET_TAG, Mesh, build_unit_square_mesh
from stokes_solver.system import StokesSystem

# волновое число тестовых решений: грубые сетки разрешают 2pi, но не 16pi
TEST_WAVE = 2.0 * np.pi


@pytest.fixture(scope="session")
def unit_triangle_space():
    """Один треугольник (0,0),(1,0),(0,1) - для поэлементных оракулов."""
    mesh = Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        triangles=np.array([[0, 1, 2]]),
        boundary_edges=np.array([[0, 1], [1, 2], [2, 0]]),
        boundary_tags=np.full(3, DIRICHLET_TAG),
    )
    return MixedSpace.taylor_hood(mesh)


@pytest.fixture(scope="session")
def tiny_mesh():
    return build_unit_square_mesh(2)


@pytest.fixture(scope="session")
def small_space():
    return MixedSpace.taylor_hood(build_unit_square_mesh(4, perturbation=0.1, seed=3))


@pytest.fixture(scope="session")
def open_space():
    return MixedSpace.taylor_hood(build_unit_square_mesh(3, perturbation=0.1, seed=1, open_boundary=True))


def make_system(space, mu=1.0, lam=0.0, k_wave=TEST_WAVE, with_boundary=True):
    tau = compute_tau(space.velocity_dofs.n_nodes)
    case = manufactured_case("div_free", k_wave=k_wave, mu=mu, lam=lam, tau=tau)
    system = StokesSystem.build(space, tau=tau, mu=mu, lam=lam, boundary=case.velocity if with_boundary else None)
    return system, case


@pytest.fixture(scope="session")
def small_system(small_space):
    return make_system(small_space)


@pytest.fixture(scope="session")
def small_al_system(small_space):
    return make_system(small_space, mu=1e-2, lam=1.0)


@pytest.fixture(scope="session")
def open_system(open_space):
    return make_system(open_space, mu=1.0, lam=0.0, with_boundary=False)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
