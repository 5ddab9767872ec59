"""Mismatched-decoding lower bound on the achievable information rate.

Each observed NOMA symbol contributes the term
``log2( sum_x p(y|x) / p(y|x_true) )`` under the receiver's (mismatched)
likelihood model; the rate per channel use is
``(log2 M - mean term) / N_c``. Accumulators add, so per-trial partial
results can be reduced in any order.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

POSTERIOR_FLOOR = 1e-12


@dataclass
class AirAccumulator:
    alphabet_size: int
    code_length: int
    total: float = 0.0
    count: int = 0
    clamps: int = 0

    def __add__(self, other):
        if (self.alphabet_size, self.code_length) != (other.alphabet_size, other.code_length):
            raise ValueError("cannot merge accumulators of different schemes")
        return AirAccumulator(
            self.alphabet_size,
            self.code_length,
            self.total + other.total,
            self.count + other.count,
            self.clamps + other.clamps,
        )

    def mean_term(self):
        if self.count == 0:
            raise ValueError("empty AIR accumulator")
        return self.total / self.count


def air_scma_update(acc, posteriors, true_index):
    """Add ``log2(1 / P(x_true | y))`` per symbol from MPA posteriors.

    Posteriors are normalised, so the numerator sum is one. Values below
    ``1e-12`` are clamped and counted in ``acc.clamps``.
    """
    posteriors = np.asarray(posteriors, dtype=float).reshape(-1, acc.alphabet_size)
    true_index = np.asarray(true_index).reshape(-1)
    p = posteriors[np.arange(true_index.size), true_index]
    low = p < POSTERIOR_FLOOR
    terms = -np.log2(np.where(low, POSTERIOR_FLOOR, p))
    acc.total += float(np.sum(terms))
    acc.count += int(true_index.size)
    acc.clamps += int(np.count_nonzero(low))
    return acc


def effective_noise_variance(h, R_n):
    """Variance of ``h^H n / ||h||^2`` for noise correlation ``R_n``:
    ``h^H R_n h / ||h||^4``. ``h`` may be batched ``(b, N_c)``."""
    h = np.atleast_2d(h)
    num = np.real(np.einsum("bi,ij,bj->b", h.conj(), R_n, h))
    return num / np.sum(np.abs(h) ** 2, axis=-1) ** 2


def gaussian_terms(a_hat, true_index, alphabet, n0_eff):
    """``log2 sum_x exp(-(|a-a_x|^2 - |a-a_true|^2)/N0')`` for each estimate."""
    a_hat = np.asarray(a_hat).reshape(-1)
    true_index = np.asarray(true_index).reshape(-1)
    n0_eff = np.broadcast_to(np.asarray(n0_eff, dtype=float).reshape(-1), a_hat.shape)
    d = np.abs(a_hat[:, None] - alphabet[None, :]) ** 2
    d_true = d[np.arange(a_hat.size), true_index]
    expo = -(d - d_true[:, None]) / n0_eff[:, None]
    return logsumexp(expo, axis=1) / math.log(2)


def air_musa_update(acc, a_hat, true_index, h, R_n, alphabet):
    """Add Gaussian-mismatch terms for matched-filter estimates ``a_hat``.

    The assumed density of ``a_hat`` given symbol ``x`` is complex Gaussian
    around ``x`` with variance ``h^H R_n h / ||h||^4``.
    """
    n0_eff = effective_noise_variance(h, R_n)
    terms = gaussian_terms(a_hat, true_index, alphabet, n0_eff)
    acc.total += float(np.sum(terms))
    acc.count += int(terms.size)
    return acc


def finalize_air(acc):
    """Rate per channel use; may be negative since it is a lower bound."""
    return (math.log2(acc.alphabet_size) - acc.mean_term()) / acc.code_length
