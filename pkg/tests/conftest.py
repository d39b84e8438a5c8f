import numpy as np
import pytest

from duality_bounds.corpus import regression_corpus
from duality_bounds.dual import minimize_dual
from duality_bounds.scattering import build_toy_problem


def random_hermitian(rng, n):
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (M + M.conj().T) / 2


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy8():
    return build_toy_problem(8, 4, 0.3, 0.5, 7)


@pytest.fixture(scope="session")
def corpus():
    return regression_corpus(20)


@pytest.fixture(scope="session")
def solved_corpus(corpus):
    """``(entry, problem, lagrangian, state)`` for every corpus instance."""
    out = []
    for e in corpus:
        p = e.problem()
        L = e.lagrangian(p)
        out.append((e, p, L, minimize_dual(L)))
    return out
