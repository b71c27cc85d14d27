import numpy as np
import pytest

from discretehj.linhj import QuadraticGeneratingFunction, QuadraticLeftHamiltonian, riccati_sequence


def random_quadratic_system(rng, n, scale=0.2):
    """A well-conditioned quadratic left Hamiltonian close to the shear ``M = I, L = -I``."""
    def sym(a):
        return 0.5 * (a + a.T)
    M = np.eye(n) + scale * sym(rng.standard_normal((n, n)))
    L = -np.eye(n) + scale * rng.standard_normal((n, n))
    K = scale * sym(rng.standard_normal((n, n)))
    return QuadraticLeftHamiltonian(M, K, L)


def random_seed_function(rng, n, scale=0.3):
    A = scale * rng.standard_normal((n, n))
    return QuadraticGeneratingFunction(A + A.T, rng.standard_normal(n), rng.standard_normal())


def well_conditioned_instance(rng, n, steps=10, limit=1e3):
    """Draw (H, S0) until ``steps`` Riccati iterates stay bounded."""
    while True:
        H = random_quadratic_system(rng, n)
        S0 = random_seed_function(rng, n)
        try:
            seq = riccati_sequence(S0, H, steps)
        except np.linalg.LinAlgError:
            continue
        if max(np.max(np.abs(S.A)) for S in seq) < limit:
            return H, seq


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
