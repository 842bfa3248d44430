import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solitonlab.eigen3 import eigenvector, symmetric_eigenvalues


def _random_symmetric(rng, n):
    A = rng.normal(size=(n, 3, 3))
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def test_matches_lapack_on_random_batch():
    A = _random_symmetric(np.random.default_rng(0), 500)
    assert np.allclose(symmetric_eigenvalues(A), np.linalg.eigvalsh(A), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_double_root_pair_mean_and_simple_root(seed, mu, simple):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    A = Q @ np.diag([simple, mu, mu]) @ Q.T
    ev = symmetric_eigenvalues(A)
    ref = np.sort([simple, mu, mu])
    assert np.all(np.abs(ev - ref) <= 1e-7 * max(1.0, np.max(np.abs(ref))))
    assert abs(ev.sum() - ref.sum()) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_scalar_and_zero_matrices():
    assert np.array_equal(symmetric_eigenvalues(2.5 * np.eye(3)), [2.5, 2.5, 2.5])
    assert np.array_equal(symmetric_eigenvalues(np.zeros((3, 3))), [0.0, 0.0, 0.0])


def test_diagonal_ordering():
    assert np.allclose(symmetric_eigenvalues(np.diag([3.0, -1.0, 0.5])), [-1.0, 0.5, 3.0])


def test_eigenvector_of_simple_eigenvalue():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    A = Q @ np.diag([-2.0, 0.5, 0.5]) @ Q.T
    v = eigenvector(A, -2.0)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.allclose(A @ v, -2.0 * v, atol=1e-12)
    with pytest.raises(ValueError):
        eigenvector(np.eye(3), 1.0)
