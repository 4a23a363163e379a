import numpy as np
import pytest

from gbattery import ModelSpec, build_bath
from gbattery.evolution import propagator_const
from gbattery.gqm import symplectic_form


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def small_spec():
    """A cheap model: 8 bath modes, moderate coupling."""
    return ModelSpec(n_bath=8, gamma=0.5, omega_d=2.0, beta=2.0)


@pytest.fixture(scope="session")
def small_bath(small_spec):
    return build_bath(small_spec)


def random_bona_fide_cm(rng, n_modes, nu_max=3.0, strength=0.6):
    """Random physical CM: symplectic congruence of a Williamson form."""
    nus = rng.uniform(1.0, nu_max, size=n_modes)
    h_rand = rng.standard_normal((2 * n_modes, 2 * n_modes))
    h_rand = 0.25 * strength * (h_rand + h_rand.T)
    transform = propagator_const(h_rand @ h_rand.T + 0.1 * np.eye(2 * n_modes), 1.0)
    core = np.diag(np.repeat(nus, 2))
    out = transform @ core @ transform.T
    return 0.5 * (out + out.T), nus


def random_symplectic(rng, n_modes, strength=0.5):
    h_rand = rng.standard_normal((2 * n_modes, 2 * n_modes))
    h_rand = strength * (h_rand @ h_rand.T) + 0.05 * np.eye(2 * n_modes)
    return propagator_const(h_rand, 1.0)


def brute_symplectic_eigenvalues(m):
    """Independent route: positive real eigenvalues of i Omega m."""
    n = m.shape[0] // 2
    vals = np.linalg.eigvals(1j * symplectic_form(n) @ m)
    reals = np.real(vals[np.real(vals) > 0])
    return np.sort(reals)
