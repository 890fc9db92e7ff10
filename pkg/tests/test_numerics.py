import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from girsanov_kpz import numerics as nm
from girsanov_kpz.errors import DimensionMismatch, NonFiniteValue, SingularMatrix


def test_inverse_of_upper_triangular():
    M = np.array([[1.0, 0.3], [0.0, 0.9]])
    inv = nm.mat_inverse(M)
    np.testing.assert_allclose(inv, [[1.0, -1.0 / 3.0], [0.0, 1.0 / 0.9]], rtol=1e-15, atol=1e-15)


def test_inverse_needs_pivoting():
    M = np.array([[0.0, 2.0], [3.0, 0.0]])
    np.testing.assert_allclose(nm.mat_inverse(M), [[0.0, 1 / 3], [0.5, 0.0]], atol=1e-16)


def test_singular_matrix_raises():
    with pytest.raises(SingularMatrix):
        nm.mat_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrix):
        nm.mat_inverse(np.zeros((3, 3)))


def test_batched_inverse_matches_rowwise():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((7, 3, 3)) + 3 * np.eye(3)
    batch = nm.mat_inverse(M)
    for i in range(7):
        assert np.array_equal(batch[i], nm.mat_inverse(M[i]))


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_inverse_roundtrip(d, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((d, d)) + d * np.eye(d)
    cond = np.linalg.cond(M)
    I = nm.matmul(M, nm.mat_inverse(M))
    assert np.max(np.abs(I - np.eye(d))) <= 1e-10 * max(1.0, cond)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        nm.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        nm.matvec(np.ones((2, 2)), np.ones(3))
    with pytest.raises(DimensionMismatch):
        nm.inner(np.ones(2), np.ones(3))
    with pytest.raises(DimensionMismatch):
        nm.trace(np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        nm.transpose(np.ones(3))
    with pytest.raises(DimensionMismatch):
        nm.mat_inverse(np.ones((2, 3)))


@given(arrays(float, (3, 3), elements=st.floats(-10, 10)),
       arrays(float, (3, 3), elements=st.floats(-10, 10)))
def test_matmul_agrees_with_numpy(A, B):
    np.testing.assert_allclose(nm.matmul(A, B), A @ B, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(nm.trace(A), np.trace(A), rtol=1e-12, atol=1e-12)


def test_linear_algebra_is_batch_invariant():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((50, 4, 4))
    v = rng.standard_normal((50, 4))
    full = nm.matvec(A, v)
    for i in (0, 17, 49):
        assert np.array_equal(full[i], nm.matvec(A[i : i + 1], v[i : i + 1])[0])


def quadratic(t, x):
    return x[..., 0] ** 2 + 3 * x[..., 0] * x[..., 1] - x[..., 1] ** 3 + t ** 2


def test_fd_gradient_and_hessian():
    x = np.array([1.0, 2.0])
    g = nm.fd_gradient(quadratic, 0.5, x)
    np.testing.assert_allclose(g, [2 + 6, 3 - 12], rtol=1e-8)
    H = nm.fd_hessian(quadratic, 0.5, x)
    np.testing.assert_allclose(H, [[2, 3], [3, -12]], rtol=1e-5)
    assert H[0, 1] == H[1, 0]


def test_fd_time_derivative_uses_forward_stencil_at_zero():
    f = lambda t, x: np.sqrt(np.asarray(t)) * 0 + np.asarray(t) ** 2 + x[..., 0]  # noqa: E731
    np.testing.assert_allclose(nm.fd_time_derivative(f, 0.0, np.array([1.0])), 0.0, atol=1e-9)
    np.testing.assert_allclose(nm.fd_time_derivative(f, 1.0, np.array([1.0])), 2.0, rtol=1e-8)


def test_fd_rejects_nonfinite():
    f = lambda t, x: np.log(x[..., 0])  # noqa: E731
    with np.errstate(all="ignore"), pytest.raises(NonFiniteValue):
        nm.fd_gradient(f, 0.0, np.array([0.0]))


@given(arrays(float, (4, 3), elements=st.floats(-3, 3)))
def test_fd_hessian_symmetric(x):
    H = nm.fd_hessian(lambda t, y: np.sin(y[..., 0] * y[..., 1]) + y[..., 2] ** 2 * y[..., 0], 0.0, x)
    assert np.array_equal(H, np.swapaxes(H, -1, -2))
