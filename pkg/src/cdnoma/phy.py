"""Transmit/receive chains and the per-user equivalent NOMA model.

Downlink is multicarrier: each OFDM symbol carries ``N`` chips per user on
its subcarriers, is precoded per subcarrier, taken to time domain and
beamformed, then sent with a cyclic prefix of ``L - 1`` samples.

Uplink is single carrier: every user sends its chip stream at rate one chip
per sample, scaled by ``sqrt(E_s/K)``, through the multi-tap channel. The
base station applies each group's analog beamformer and then the
delay-matched digital filter ``r_n = sum_l W_l^H y_{n+l}``. The frame is
followed by ``L - 1`` silent samples so every tap of the last chip is seen.

Inter-group interference and residual ISI are always physically present in
the simulated signals; the equivalent model handed to receivers ignores
both.
"""

from dataclasses import dataclass

import numpy as np

from .channel import complex_normal


@dataclass
class EquivalentStream:
    """What a receiver sees for one user's stream.

    ``z[k]`` is the observation of NOMA symbol ``k`` (length ``N_c``),
    ``gains[k, i, u]`` the gain of user ``u`` on resource ``i`` (leading
    axis may be 1 when constant over symbols), and ``noise_cov`` the assumed
    ``N_c x N_c`` noise correlation.
    """

    user: int
    z: np.ndarray
    gains: np.ndarray
    noise_cov: np.ndarray

    @property
    def code_length(self):
        return self.z.shape[1]

    def spread_matrix(self, codes):
        """``H_eq`` of a MUSA stream: columns ``diag(gains) s_u``, shape
        ``(n or 1, N_c, K)``."""
        return self.gains * codes.T[None]

    def own_spread(self, codes):
        """Own equivalent channel ``h_eq^(m,m)``, shape ``(n or 1, N_c)``."""
        return self.gains[..., self.user] * codes[self.user][None]


# --- downlink --------------------------------------------------------------------


def downlink_tx(chips, S, W, c, cp):
    """Time-domain transmit samples.

    Parameters
    ----------
    chips : list of ndarray
        Per group ``(K_g, n_ofdm * N)`` chip streams, ``N`` chips per OFDM symbol.
    S, W, c : lists
        Analog ``(M, D_g)``, digital ``(N, D_g, K_g)`` and scaling per group.
    cp : int
        Cyclic prefix length.

    Returns
    -------
    ndarray ``(n_ofdm, N + cp, M)``.
    """
    N = W[0].shape[0]
    M = S[0].shape[0]
    x = None
    for b, Sg, Wg, cg in zip(chips, S, W, c):
        K = b.shape[0]
        bk = b.T.reshape(-1, N, K)
        X = np.sqrt(cg) * np.einsum("kdu,oku->okd", Wg, bk)
        t = np.fft.ifft(X, axis=1, norm="ortho") @ Sg.T
        x = t if x is None else x + t
    if x is None:
        raise ValueError("no groups to transmit")
    assert x.shape[-1] == M
    return np.concatenate([x[:, N - cp :], x], axis=1) if cp else x


def downlink_rx(x, taps, cp, n0, rng):
    """Received subcarrier samples ``r_k^(g)`` of every group.

    ``taps[g]`` is ``(L, M, K_g)``. Returns a list of ``(n_ofdm, N, K_g)``
    arrays. Pass ``rng=None`` for a noiseless receiver.
    """
    n_ofdm, total, M = x.shape
    N = total - cp
    out = []
    for H in taps:
        L, _, K = H.shape
        if L - 1 > cp:
            raise ValueError(f"cyclic prefix {cp} shorter than channel memory {L - 1}")
        y = np.zeros((n_ofdm, N, K), dtype=complex)
        for l in np.flatnonzero(np.any(H != 0, axis=(1, 2))):
            y += x[:, cp - l : cp - l + N] @ H[l].conj()
        if rng is not None and n0 > 0:
            y += np.sqrt(n0) * complex_normal(rng, y.shape)
        out.append(np.fft.fft(y, axis=1, norm="ortho"))
    return out


# --- uplink ----------------------------------------------------------------------


def uplink_tx(chips, energies):
    """Per-group transmit samples ``x_n = sqrt(E_s/K) b_n`` as ``(T, K_g)``."""
    return [np.sqrt(Es / b.shape[0]) * b.T for b, Es in zip(chips, energies)]


def uplink_propagate(x, taps, n0, rng):
    """Antenna samples ``y_n = sum_g sum_l H_l^(g) x_{n-l}^(g) + n_n`` for
    ``n < T + L - 1``."""
    T = x[0].shape[0]
    L, M, _ = taps[0].shape
    y = np.zeros((T + L - 1, M), dtype=complex)
    for xg, H in zip(x, taps):
        for l in np.flatnonzero(np.any(H != 0, axis=(1, 2))):
            y[l : l + T] += xg @ H[l].T
    if rng is not None and n0 > 0:
        y += np.sqrt(n0) * complex_normal(rng, y.shape)
    return y


def uplink_combine(y, S, W):
    """``r_n = sum_l W_l^H S^H y_{n+l}`` for ``n < T``; returns ``(T, K_g)``."""
    L = W.shape[0]
    T = y.shape[0] - (L - 1)
    yg = y @ S.conj()
    r = np.zeros((T, W.shape[2]), dtype=complex)
    for l in np.flatnonzero(np.any(W != 0, axis=(1, 2))):
        r += yg[l : l + T] @ W[l].conj()
    return r


def uplink_rx(chips, taps, S, W, energies, n0, rng):
    """Full uplink: transmit, propagate, and per-group combining."""
    y = uplink_propagate(uplink_tx(chips, energies), taps, n0, rng)
    return [uplink_combine(y, Sg, Wg) for Sg, Wg in zip(S, W)]


def noise_corr_ul(W, S, n0):
    """Filtered-noise correlation ``R_xi[p] = N0 sum_l W_l^H S^H S W_{l+p}``.

    Returns ``(2L - 1, K, K)`` with lag ``p`` at index ``p + L - 1``.
    """
    L, _, K = W.shape
    Q = S.conj().T @ S
    R = np.zeros((2 * L - 1, K, K), dtype=complex)
    active = np.flatnonzero(np.any(W != 0, axis=(1, 2)))
    for l in active:
        left = W[l].conj().T @ Q
        for l2 in active:
            R[l2 - l + L - 1] += left @ W[l2]
    return n0 * R


def stream_noise_cov(R_xi, user, code_length):
    """Toeplitz ``[R_n]_{ij} = [R_xi[i - j]]_{(m, m)}`` for stream ``user``."""
    L = (R_xi.shape[0] + 1) // 2
    i = np.arange(code_length)
    lag = i[:, None] - i[None, :]
    vals = np.zeros(lag.shape, dtype=complex)
    inside = np.abs(lag) < L
    vals[inside] = R_xi[lag[inside] + L - 1, user, user]
    return vals


# --- equivalent streams ----------------------------------------------------------


def extract_streams(r, beta, code_length, noise_covs):
    """Cut per-user received sequences into NOMA-symbol observations.

    Parameters
    ----------
    r : ndarray ``(T, K)``
        Received chip-rate samples of one group; ``T`` a multiple of ``N_c``.
    beta : ndarray
        ``(K, K)`` constant gains (uplink) or ``(N, K, K)`` per-subcarrier
        gains (downlink, chip ``t`` sits on subcarrier ``t mod N``).
    noise_covs : list of ``(N_c, N_c)`` arrays, one per stream.
    """
    T, K = r.shape
    if T % code_length:
        raise ValueError(f"received length {T} is not a multiple of code length {code_length}")
    n_sym = T // code_length
    if beta.ndim == 2:
        per_res = np.broadcast_to(beta[None], (code_length, K, K))[None]
    else:
        N = beta.shape[0]
        sub = np.arange(T) % N
        per_res = beta[sub].reshape(n_sym, code_length, K, K)
    streams = []
    for m in range(K):
        z = r[:, m].reshape(n_sym, code_length)
        streams.append(EquivalentStream(m, z, per_res[:, :, m, :], noise_covs[m]))
    return streams


def uplink_beta(Phi0, Es, K):
    """Uplink intra-group gains ``beta_0 = sqrt(E_s/K) Phi_0``."""
    return np.sqrt(Es / K) * Phi0


def isi_ratio(Phi):
    """Energy of the off-centre gain taps relative to the centre tap,
    ``sum_{l!=0} ||Phi_l||_F^2 / ||Phi_0||_F^2``."""
    L = (Phi.shape[0] + 1) // 2
    centre = np.sum(np.abs(Phi[L - 1]) ** 2)
    return (np.sum(np.abs(Phi) ** 2) - centre) / centre
