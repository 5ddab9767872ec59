"""Two-stage (analog + digital) beamforming for user groups.

Array shapes used throughout:

* analog beamformer ``S``: ``(M, D_g)``
* time-domain taps ``H[l]``: ``(L, M, K)``; effective taps ``S^H H[l]``: ``(L, D_g, K)``
* downlink frequency response ``Lam[k]``: ``(N, K_g, D_g)``
* digital beamformers ``W``: ``(N, D_g, K_g)`` downlink, ``(L, D_g, K_g)`` uplink
* uplink gain matrices ``Phi``: ``(2L - 1, K_g, K_g)``, tap ``l`` stored at ``l + L - 1``
"""

import numpy as np

from .numerics import generalized_eig_top

KINDS = ("CMF", "ZF")


def analog_mc(R_sum, R_y, D_g):
    """Multicarrier GEB: top ``D_g`` generalized eigenvectors of
    ``(R_sum, R_y)`` with unit-norm columns."""
    if D_g > R_y.shape[0]:
        raise ValueError(f"D_g={D_g} exceeds array size {R_y.shape[0]}")
    return generalized_eig_top(R_sum, R_y, D_g).vectors


def allocate_rf_chains(spectra, D_g):
    """Split ``D_g`` RF chains over delays to maximise
    ``prod_l prod_{n<=d_l} (1 + lambda_n^l)``.

    The objective is a sum of ``log(1 + lambda)`` over chosen modes, and each
    delay's spectrum is sorted descending, so taking the ``D_g`` largest modes
    overall (ties resolved towards lower delay, then lower mode) is exact.
    """
    if len(spectra) == 0:
        raise ValueError("no delay spectra supplied")
    spectra = [np.asarray(s, dtype=float) for s in spectra]
    for s in spectra:
        if np.any(np.diff(s) > 0):
            raise ValueError("each spectrum must be sorted in descending order")
    total = sum(len(s) for s in spectra)
    if D_g > total:
        raise ValueError(f"D_g={D_g} exceeds the {total} available modes")
    modes = [(-np.log1p(max(v, 0.0)), l, n) for l, s in enumerate(spectra) for n, v in enumerate(s)]
    modes.sort()
    d = np.zeros(len(spectra), dtype=int)
    for _, l, _ in modes[:D_g]:
        d[l] += 1
    return d


def sc_spectra(R_l, R_y, depth):
    """Dominant ``depth`` generalized eigenpairs for each per-delay covariance."""
    return [generalized_eig_top(R, R_y, min(depth, R.shape[0])) for R in R_l]


def analog_sc(R_l, R_y, d):
    """Joint angle-delay GEB: block ``l`` holds the ``d[l]`` dominant
    generalized eigenvectors of ``(R_l[l], R_y)``; blocks are concatenated in
    delay order. Returns ``(S, blocks)``; zero-width blocks are kept as empty
    ``(M, 0)`` arrays so indices line up with ``R_l``."""
    M = R_y.shape[0]
    blocks = []
    for R, n in zip(R_l, d):
        if n == 0:
            blocks.append(np.zeros((M, 0), dtype=complex))
        else:
            blocks.append(generalized_eig_top(R, R_y, int(n)).vectors)
    return np.concatenate(blocks, axis=1), blocks


def analog_sc_auto(R_l, R_y, D_g):
    """Allocate RF chains from the generalized spectra, then build the blocks."""
    pairs = sc_spectra(R_l, R_y, D_g)
    d = allocate_rf_chains([p.values for p in pairs], D_g)
    S = np.concatenate([p.vectors[:, :n] for p, n in zip(pairs, d)], axis=1)
    blocks = [p.vectors[:, :n] for p, n in zip(pairs, d)]
    return S, blocks, d


def effective_channels(S, H):
    """``S^H H_l`` for every tap."""
    return np.einsum("md,lmk->ldk", S.conj(), H)


def freq_response(H_eff, N):
    """``Lam_k = sum_l H_eff[l]^H exp(-2j pi l k / N)`` for ``k < N``."""
    L = H_eff.shape[0]
    if L > N:
        raise ValueError(f"channel memory {L} exceeds DFT size {N}")
    return np.fft.fft(H_eff.conj().transpose(0, 2, 1), n=N, axis=0)


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"beamformer kind must be one of {KINDS}, got {kind!r}")


def digital_dl(Lam, n0, Es, K, kind):
    """Per-subcarrier CMF ``Lam^H`` or regularized ZF
    ``Lam^H (Lam Lam^H + K N0/Es I)^-1``."""
    _check_kind(kind)
    LamH = Lam.conj().transpose(0, 2, 1)
    if kind == "CMF":
        return LamH
    A = Lam @ LamH + (K * n0 / Es) * np.eye(Lam.shape[1])
    # A is Hermitian, so (LamH A^-1) = (A^-1 Lam)^H
    return np.linalg.solve(A, Lam).conj().transpose(0, 2, 1)


def block_mask(delays, widths, L):
    """``(L, D_g)`` 0/1 mask selecting, for tap ``delays[i]``, the columns of
    the analog block built for that MPC. Taps without an MPC or without RF
    chains get an all-zero row."""
    widths = np.asarray(widths, dtype=int)
    if len(delays) != len(widths):
        raise ValueError("one block width per MPC delay is required")
    mask = np.zeros((L, int(widths.sum())))
    off = np.concatenate([[0], np.cumsum(widths)])
    for i, l in enumerate(delays):
        mask[l, off[i] : off[i + 1]] = 1.0
    return mask


def digital_ul(H_eff, n0, Es, K, kind, mask=None):
    """Per-tap CMF ``H_eff[l]`` or ZF
    ``H_eff[l] (sum_l' H_eff[l']^H H_eff[l'] + K N0/Es I)^-1``.

    With ``mask`` (see :func:`block_mask`) each tap's filter is designed on
    its own analog block only, i.e. on ``S_l^H H_l``. This is what the
    formulas reduce to when the per-MPC eigenspaces are exactly orthogonal;
    at finite ``M`` it keeps ZF from inverting the weak cross-block leakage
    directions, which would otherwise amplify ISI as ``E_s`` grows.
    """
    _check_kind(kind)
    if mask is not None:
        H_eff = H_eff * mask[:, :, None]
    if kind == "CMF":
        return H_eff.copy()
    gram = np.einsum("ldi,ldj->ij", H_eff.conj(), H_eff)
    A = gram + (K * n0 / Es) * np.eye(H_eff.shape[2])
    return np.einsum("ldi,ij->ldj", H_eff, np.linalg.inv(A))


def gain_matrices_ul(W, H_eff):
    """``Phi_l = sum_l' W[l']^H H_eff[l + l']`` for ``|l| < L``; taps outside
    ``[0, L)`` count as zero."""
    L = H_eff.shape[0]
    K = W.shape[2]
    Phi = np.zeros((2 * L - 1, K, H_eff.shape[2]), dtype=complex)
    active = np.flatnonzero(np.any(W != 0, axis=(1, 2)))
    for lp in active:
        # l + lp runs over [0, L) so l runs over [-lp, L-1-lp]
        Phi[L - 1 - lp : 2 * L - 1 - lp] += np.einsum("dk,ldj->lkj", W[lp].conj(), H_eff)
    return Phi


def gain_matrices_dl(Lam, W, c):
    """Intra-group downlink gains ``Phi_k = sqrt(c) Lam_k W_k``."""
    return np.sqrt(c) * (Lam @ W)


def transmit_power(S, W, chip_power):
    """``P^(g)`` for given beamformers: the chip-power-weighted mean of
    ``||S W_k e_m||^2`` over subcarriers. ``W`` may carry a leading batch of
    channel draws, which is averaged as well."""
    W = np.asarray(W)
    if W.ndim == 3:
        W = W[None]
    SW = np.einsum("md,rndk->rnmk", S, W)
    per = np.sum(np.abs(SW) ** 2, axis=2)
    return float(np.mean(np.sum(per * chip_power, axis=-1)))


def power_scaling_dl(S, W_samples, chip_power, Es):
    """Downlink group scaling ``c = E_s / P``.

    ``chip_power[k, m]`` is ``E|b_k^(g_m)|^2`` (the pattern matrix weighted by
    the scheme's chip energies); ``W_samples`` is a batch of digital
    beamformers over independent channel draws.
    """
    P = transmit_power(S, W_samples, chip_power)
    if not P > 0:
        raise ValueError("beamformers carry no power")
    return Es / P
