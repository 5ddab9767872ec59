import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdnoma.numerics import check_hermitian, generalized_eig_top, hermitian_eig, solve_hermitian_pd


def rand_herm(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (X + X.conj().T) / 2


def rand_pd(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X @ X.conj().T + n * np.eye(n)


seeds = st.integers(0, 2**32 - 1)


def test_identity_eig():
    vals, vecs = hermitian_eig(np.eye(3))
    assert np.allclose(vals, 1)
    assert np.allclose(vecs.conj().T @ vecs, np.eye(3), atol=1e-12)


def test_diagonal_eig_order():
    vals, vecs = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(vals, [3, 2, 1])
    # eigenvector of 3 is e_0, of 2 is e_2
    assert np.isclose(abs(vecs[0, 0]), 1)
    assert np.isclose(abs(vecs[2, 1]), 1)


def test_reconstruction_8x8():
    rng = np.random.default_rng(1)
    A = rand_herm(rng, 8)
    vals, V = hermitian_eig(A)
    assert np.all(np.diff(vals) <= 0)
    assert np.linalg.norm(V @ np.diag(vals) @ V.conj().T - A) < 1e-9 * np.linalg.norm(A)
    assert np.allclose(V.conj().T @ V, np.eye(8), atol=1e-9)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        check_hermitian(np.ones((2, 3)))


def test_generalized_identity_b_matches_standard():
    rng = np.random.default_rng(2)
    A = rand_herm(rng, 7)
    g = generalized_eig_top(A, np.eye(7), 3)
    s = hermitian_eig(A)
    assert np.allclose(g.values, s.values[:3], atol=1e-9)


def test_generalized_proportional():
    rng = np.random.default_rng(3)
    B = rand_pd(rng, 5)
    g = generalized_eig_top(2 * B, B, 1)
    assert np.isclose(g.values[0], 2.0, atol=1e-9)


def test_generalized_residual_6x6():
    rng = np.random.default_rng(4)
    A, B = rand_herm(rng, 6), rand_pd(rng, 6)
    vals, V = generalized_eig_top(A, B, 6)
    scale = np.linalg.norm(A) + np.linalg.norm(B)
    for lam, v in zip(vals, V.T):
        assert np.linalg.norm(A @ v - lam * B @ v) < 1e-8 * scale
        assert np.isclose(np.linalg.norm(v), 1.0, atol=1e-12)
    assert np.all(np.diff(vals) <= 0)


def test_generalized_errors():
    A = np.eye(3)
    with pytest.raises(ValueError):
        generalized_eig_top(A, np.eye(3), 4)
    with pytest.raises(np.linalg.LinAlgError):
        generalized_eig_top(A, -np.eye(3), 1)
    assert generalized_eig_top(A, np.eye(3), 0).vectors.shape == (3, 0)


def test_solve_examples():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    assert np.allclose(solve_hermitian_pd(np.eye(4), X), X)
    assert np.allclose(solve_hermitian_pd(2 * np.eye(4), X), X / 2)
    B = rand_pd(rng, 4)
    Y = solve_hermitian_pd(B, X)
    assert np.linalg.norm(B @ Y - X) < 1e-9 * np.linalg.norm(X)


def test_solve_indefinite_fails():
    with pytest.raises(np.linalg.LinAlgError):
        solve_hermitian_pd(np.diag([1.0, -1.0]), np.ones(2))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(2, 9), d=st.integers(1, 9))
def test_prop_identity_reduction(seed, n, d):
    d = min(d, n)
    A = rand_herm(np.random.default_rng(seed), n)
    assert np.allclose(generalized_eig_top(A, np.eye(n), d).values, hermitian_eig(A).values[:d], atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(2, 9))
def test_prop_rayleigh_quotient(seed, n):
    rng = np.random.default_rng(seed)
    A, B = rand_herm(rng, n), rand_pd(rng, n)
    vals, V = generalized_eig_top(A, B, n)
    for lam, v in zip(vals, V.T):
        rq = np.real(v.conj() @ A @ v) / np.real(v.conj() @ B @ v)
        assert abs(rq - lam) < 1e-8 * max(1.0, abs(lam))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(1, 9))
def test_prop_pd_eigenvalues_positive(seed, n):
    B = rand_pd(np.random.default_rng(seed), n)
    assert np.all(hermitian_eig(B).values > 0)
