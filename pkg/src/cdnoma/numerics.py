"""Hermitian eigen-solvers and positive-definite solves.

Every beamformer and receiver in the package reduces to one of three
kernels: a standard Hermitian eigendecomposition, the dominant part of a
generalized Hermitian-definite eigenproblem ``A v = lambda B v``, and a
linear solve against a Hermitian positive-definite matrix.
"""

from typing import NamedTuple

import numpy as np
from scipy import linalg

HERMITIAN_RTOL = 1e-12


class EigPairs(NamedTuple):
    """Eigenvalues in descending order and the matching unit-norm eigenvectors
    stored as the columns of ``vectors``."""

    values: np.ndarray
    vectors: np.ndarray


def check_hermitian(A, name="matrix", rtol=HERMITIAN_RTOL):
    """Raise ``ValueError`` unless ``A`` is square and Hermitian to ``rtol``
    relative Frobenius tolerance. Returns ``A`` as an ndarray."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError(f"{name} is not Hermitian")
    return A


def hermitian_eig(A) -> EigPairs:
    """All eigenpairs of a Hermitian matrix, largest eigenvalue first."""
    A = check_hermitian(A, "A")
    w, V = linalg.eigh(A)
    return EigPairs(w[::-1].copy(), V[:, ::-1].copy())


def generalized_eig_top(A, B, d) -> EigPairs:
    """Dominant ``d`` solutions of ``A v = lambda B v``.

    ``B`` is whitened with its Cholesky factor ``B = L L^H`` so the problem
    becomes the standard Hermitian one for ``L^{-1} A L^{-H}``. Eigenvectors
    are mapped back with ``L^{-H}`` and rescaled to unit Euclidean norm.

    Raises
    ------
    ValueError
        If ``d`` is outside ``[0, n]`` or a matrix is not Hermitian.
    numpy.linalg.LinAlgError
        If ``B`` is not positive definite.
    """
    A = check_hermitian(A, "A")
    B = check_hermitian(B, "B")
    n = A.shape[0]
    if B.shape != A.shape:
        raise ValueError(f"A and B shapes differ: {A.shape} vs {B.shape}")
    if not 0 <= d <= n:
        raise ValueError(f"d={d} outside [0, {n}]")
    if d == 0:
        return EigPairs(np.zeros(0), np.zeros((n, 0), dtype=np.result_type(A, B, complex)))

    L = linalg.cholesky(B, lower=True)
    Linv_A = linalg.solve_triangular(L, A, lower=True)
    C = linalg.solve_triangular(L, Linv_A.conj().T, lower=True)
    C = 0.5 * (C + C.conj().T)
    w, Y = linalg.eigh(C, subset_by_index=[n - d, n - 1])
    V = linalg.solve_triangular(L.conj().T, Y, lower=False)
    V /= np.linalg.norm(V, axis=0, keepdims=True)
    return EigPairs(w[::-1].copy(), V[:, ::-1].copy())


def solve_hermitian_pd(B, X):
    """Return ``B^{-1} X`` for Hermitian positive-definite ``B``.

    A failed Cholesky factorization surfaces as ``numpy.linalg.LinAlgError``.
    """
    B = check_hermitian(B, "B")
    factor = linalg.cho_factor(B, lower=True)
    return linalg.cho_solve(factor, X)
