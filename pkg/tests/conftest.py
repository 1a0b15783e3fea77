import numpy as np
import pytest

from nesstur.model import SystemParams

# Captioned parameter sets used throughout the tests.
FIG_RELAX = SystemParams(omega=1.0, g=0.75, beta_c=3.0, beta_h=1.0, nu_c=0.004, nu_h=0.004)
FIG_SCAN = SystemParams(omega=1.0, g=0.5, beta_c=3.0, beta_h=1.0, nu_c=0.012, nu_h=0.004)
FIG_VIOLATION = SystemParams(omega=1.0, g=0.5, beta_c=3.0, beta_h=1.0, nu_c=0.002, nu_h=0.008)


def random_params(rng: np.random.Generator) -> SystemParams:
    """Valid parameter draw with bounded Boltzmann suppression.

    beta_c * 2*omega stays at or below 12, keeping the smallest steady-state
    population above ~1e-6; deeper suppression would push eigenvalues below
    the absolute accuracy of dense eigensolvers and void the tight
    closed-form tolerances asserted in the suite.
    """
    omega = float(rng.uniform(0.5, 2.0))
    g = float(omega * rng.uniform(0.05, 0.95))
    beta_h = float(rng.uniform(0.2, 2.0) / omega)
    beta_c = float(beta_h * rng.uniform(1.0 + 1e-6, 3.0))
    nu_c = float(10 ** rng.uniform(-3.3, -1.3))
    nu_h = float(10 ** rng.uniform(-3.3, -1.3))
    return SystemParams(omega, g, beta_c, beta_h, nu_c, nu_h)


def random_hermitian(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def random_density(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    a = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = a @ a.conj().T
    return rho / rho.trace().real


def random_unitary(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(a)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240613)
