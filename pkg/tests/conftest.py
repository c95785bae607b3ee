import numpy as np
import pytest
from hypothesis import strategies as st

from darbouxlax.field import ExpSum


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def expsum_strategy(dim=1, max_terms=3):
    """Random ExpSum with moderate exponents so values stay O(1) on [-1, 1]."""
    # a 1/64 lattice keeps nonzero wavenumbers away from the 1/k cancellation regime
    real = st.integers(-64, 64).map(lambda n: n / 64)
    term = st.tuples(
        st.lists(real, min_size=2 * dim * dim, max_size=2 * dim * dim),
        real, real)

    def build(terms):
        out = []
        for c, k, om in terms:
            c = np.array(c).reshape(2, dim, dim)
            out.append((c[0] + 1j * c[1], k, om))
        return ExpSum(dim, out)

    return st.lists(term, min_size=1, max_size=max_terms).map(build)


GRID_X = np.linspace(-1.0, 1.0, 9)
GRID_T = np.linspace(-0.5, 0.5, 3)


def sup(f, x=GRID_X, t=GRID_T):
    X, T = np.meshgrid(np.atleast_1d(x), np.atleast_1d(t), indexing="ij")
    return float(np.max(np.abs(f(X, T))))
