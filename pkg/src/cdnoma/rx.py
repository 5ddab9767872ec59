"""NOMA detectors on the per-user equivalent model.

* :func:`mpa_decode` - log-domain sum-product over an SCMA factor graph
* :func:`mmse_sic` - ordered MMSE successive interference cancellation
* :func:`pic_aided_decode` - multi-stream MMSE-SIC followed by PIC rounds
* :func:`mfb_decode` - genie interference removal plus matched filtering

Batched arrays: observations ``z`` are ``(n, N_c)``; equivalent channels are
``(b, N_c, K)`` where ``b`` is 1 (shared by all symbols) or ``n``.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import logsumexp

DEFAULT_MPA_ITERATIONS = 10
DEFAULT_PIC_ITERATIONS = 4


def nearest_symbol(a_hat, alphabet):
    """Minimum-distance decision ``argmin_i |a_hat - a_i|^2``."""
    a_hat = np.asarray(a_hat)
    best = np.zeros(a_hat.shape, dtype=int)
    dmin = np.full(a_hat.shape, np.inf)
    # loop over the (small) alphabet; strict < keeps the lowest index on ties
    for i, s in enumerate(np.asarray(alphabet).ravel()):
        e = a_hat - s
        d = e.real**2 + e.imag**2
        closer = d < dmin
        best[closer] = i
        dmin = np.where(closer, d, dmin)
    return best


# --- MPA ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MpaConfig:
    iterations: int = DEFAULT_MPA_ITERATIONS

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("MPA needs at least one iteration")


def _rowmax(a):
    # max over a short last axis; an elementwise fold beats ndarray.max here
    out = a[..., 0].copy()
    for i in range(1, a.shape[-1]):
        np.maximum(out, a[..., i], out=out)
    return out[..., None]


def _normalize(logm):
    m = _rowmax(logm)
    m = np.where(np.isfinite(m), m, 0.0)
    return logm - (np.log(np.sum(_shifted_exp(logm, -1, m), axis=-1, keepdims=True)) + m)


def _shifted_exp(logm, axes, mx=None):
    if mx is None:
        mx = _rowmax(logm) if axes in (-1, (1,)) and logm.ndim == 2 else np.max(logm, axis=axes, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
    d = logm - mx
    # terms below e^-700 are zero at double precision; dropping them early
    # keeps subnormals (very slow on most CPUs) out of the contractions
    return np.where(d > -_SUBNORMAL_NATS, np.exp(np.maximum(d, -_SUBNORMAL_NATS)), 0.0)


MPA_CHUNK = 4096
_UNDERFLOW_GUARD = -600.0
_FLOOR_NATS = 745.0
_SUBNORMAL_NATS = 700.0


def mpa_decode(z, gains, noise_var, codebook, cfg=MpaConfig(), active=None):
    """Symbol posteriors of every user after ``cfg.iterations`` flooding rounds.

    Messages are kept as log-probabilities. Each check-node update is a
    log-sum-exp over the other users' symbols; it is evaluated as a
    contraction of max-shifted exponentials; rows where that nearly
    underflows are recomputed with an explicit ``logsumexp``, and single
    entries that underflow are floored 745 nats below their row maximum.
    Symbols are independent, so rows are processed in chunks of
    ``MPA_CHUNK``.

    Parameters
    ----------
    z : ``(n, N_c)`` observations.
    gains : ``(b, N_c, K)`` per-resource gains of each user, ``b`` in {1, n}.
    noise_var : ``(N_c,)`` or ``(b, N_c)`` noise variance per resource.
    codebook : :class:`~cdnoma.noma.ScmaCodebook`.
    active : optional boolean mask of users taking part in the graph; absent
        users are treated as silent.

    Returns
    -------
    ``(n, K, M)`` posteriors; each row sums to one.
    """
    z = np.atleast_2d(z)
    n, Nc = z.shape
    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float), (gains.shape[0], Nc))
    if n <= MPA_CHUNK:
        return _mpa_block(z, gains, noise_var, codebook, cfg, active)
    out = np.empty((n, codebook.users, codebook.alphabet_size))
    for a in range(0, n, MPA_CHUNK):
        sl = slice(a, a + MPA_CHUNK)
        g = gains if gains.shape[0] == 1 else gains[sl]
        nv = noise_var if noise_var.shape[0] == 1 else noise_var[sl]
        out[sl] = _mpa_block(z[sl], g, nv, codebook, cfg, active)
    return out


def _outer(msgs):
    # (n, M) x ... -> (n, M^len) with the first message varying slowest
    out = msgs[0]
    for m in msgs[1:]:
        out = (out[:, :, None] * m[:, None, :]).reshape(out.shape[0], -1)
    return out


def _mpa_block(z, gains, noise_var, codebook, cfg, active):
    n, Nc = z.shape
    K, M = codebook.users, codebook.alphabet_size
    occ = codebook.occupancy.astype(bool)
    if active is not None:
        occ = occ & np.asarray(active, dtype=bool)[None, :]
    res_users = [np.flatnonzero(occ[r]) for r in range(Nc)]

    metrics, kernels = [], []
    for r, users in enumerate(res_users):
        v = len(users)
        pts = np.zeros((gains.shape[0],) + (M,) * v, dtype=complex)
        for j, u in enumerate(users):
            shape = [gains.shape[0]] + [1] * v
            shape[j + 1] = M
            pts = pts + (gains[:, r, u, None] * codebook.codewords[u, :, r]).reshape(shape)
        zr = z[:, r].reshape((n,) + (1,) * v)
        nv = noise_var[:, r].reshape((-1,) + (1,) * v)
        metric = -np.abs(zr - pts) ** 2 / nv
        metrics.append(metric)
        E = _shifted_exp(metric, tuple(range(1, v + 1)))
        # kernel j: output axis first, the other users flattened in order
        kernels.append([np.ascontiguousarray(np.moveaxis(E, j + 1, 1)).reshape(n, M, -1) for j in range(v)])

    uniform = np.full((n, M), -np.log(M))
    v2f = [[uniform for _ in users] for users in res_users]
    f2v = [[uniform for _ in users] for users in res_users]
    # position of user u inside resource r's user list
    slot = {(r, u): j for r, users in enumerate(res_users) for j, u in enumerate(users)}
    user_res = [[r for r in range(Nc) if occ[r, u]] for u in range(K)]

    for _ in range(cfg.iterations):
        for r, users in enumerate(res_users):
            v = len(users)
            if v == 0:
                continue
            lin = [_shifted_exp(m, (1,)) for m in v2f[r]]
            for j in range(v):
                others = [lin[jp] for jp in range(v) if jp != j]
                if others:
                    s = (kernels[r][j] @ _outer(others)[:, :, None])[..., 0]
                else:
                    s = kernels[r][j][..., 0]
                with np.errstate(divide="ignore"):
                    out = np.log(s)
                top = _rowmax(out)
                bad = ~(top[:, 0] > _UNDERFLOW_GUARD)
                if np.any(bad):
                    out[bad] = _exact_check_update(metrics[r], v2f[r], j, bad)
                    top = _rowmax(out)
                # isolated underflow: the entry is > 700 nats below the row
                # maximum, so its probability is zero to double precision
                out = np.maximum(out, top - _FLOOR_NATS)
                f2v[r][j] = _normalize(out)
        for u in range(K):
            rs = user_res[u]
            for r in rs:
                parts = [f2v[rp][slot[(rp, u)]] for rp in rs if rp != r]
                if not parts:
                    v2f[r][slot[(r, u)]] = uniform
                elif len(parts) == 1:
                    v2f[r][slot[(r, u)]] = parts[0]  # already normalised
                else:
                    v2f[r][slot[(r, u)]] = _normalize(sum(parts))

    post = np.full((n, K, M), 1.0 / M)
    for u in range(K):
        if user_res[u]:
            belief = sum(f2v[r][slot[(r, u)]] for r in user_res[u])
            post[:, u] = np.exp(_normalize(belief))
    return post


def _exact_check_update(metric, incoming, j, rows):
    v = len(incoming)
    M = incoming[0].shape[1]
    acc = metric[rows] if metric.shape[0] > 1 else np.broadcast_to(metric, (int(rows.sum()),) + metric.shape[1:])
    for jp in range(v):
        if jp != j:
            shape = [-1] + [1] * v
            shape[jp + 1] = M
            acc = acc + incoming[jp][rows].reshape(shape)
    axes = tuple(a + 1 for a in range(v) if a != j)
    return logsumexp(acc, axis=axes) if axes else acc


def exhaustive_marginals(z, gains, noise_var, codebook):
    """Exact symbol marginals by enumerating all ``M^K`` joint hypotheses
    under the same per-resource Gaussian likelihood as :func:`mpa_decode`."""
    z = np.atleast_2d(z)
    n, Nc = z.shape
    K, M = codebook.users, codebook.alphabet_size
    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float), (gains.shape[0], Nc))
    hyps = np.array(list(product(range(M), repeat=K)))
    # (H, K, Nc) codewords per hypothesis
    cw = codebook.codewords[np.arange(K)[None, :], hyps]
    rx = np.einsum("brk,hkr->bhr", gains, cw)
    loglik = -np.sum(np.abs(z[:, None, :] - rx) ** 2 / noise_var[:, None, :], axis=-1)
    joint = np.exp(loglik - logsumexp(loglik, axis=1, keepdims=True))
    out = np.zeros((n, K, M))
    for k in range(K):
        for x in range(M):
            out[:, k, x] = joint[:, hyps[:, k] == x].sum(axis=1)
    return out


# --- linear MMSE and SIC -------------------------------------------------------------


def mmse_filter(H, R_n):
    """``W = H^H (H H^H + R_n)^-1``; batched over leading axes."""
    H = np.asarray(H)
    A = H @ np.swapaxes(H.conj(), -1, -2) + R_n
    # A Hermitian: H^H A^-1 = (A^-1 H)^H
    return np.swapaxes(np.linalg.solve(A, H).conj(), -1, -2)


def sinr(H, R_n, user):
    """SINR of column ``user`` after MMSE filtering, by direct evaluation of
    ``h^H (sum_{j != user} h_j h_j^H + R_n)^-1 h``."""
    H = np.asarray(H)
    h = H[:, user]
    others = np.delete(H, user, axis=1)
    B = others @ others.conj().T + R_n
    return float(np.real(h.conj() @ np.linalg.solve(B, h)))


def _sinr_from_q(q):
    # q -> 1 means no residual interference or noise: infinite SINR
    with np.errstate(over="ignore", divide="ignore"):
        return q / np.maximum(1.0 - q, np.finfo(float).tiny)


def sinr_all(H, R_n, mask=None):
    """SINR of every (optionally masked-in) column, batched.

    Uses ``SINR = q / (1 - q)`` with ``q = h^H (H H^H + R)^-1 h``, which is
    the same quadratic form as :func:`sinr` by the matrix inversion lemma.
    Masked-out users get ``-inf``.
    """
    H = np.asarray(H)
    if mask is not None:
        Hm = H * mask[..., None, :]
    else:
        Hm = H
    A = Hm @ np.swapaxes(Hm.conj(), -1, -2) + R_n
    X = np.linalg.solve(A, H)
    q = np.real(np.sum(H.conj() * X, axis=-2))
    s = _sinr_from_q(q)
    if mask is not None:
        s = np.where(mask, s, -np.inf)
    return s, X


@dataclass
class SicResult:
    indices: np.ndarray
    estimates: np.ndarray
    order: np.ndarray
    initial_sinr: np.ndarray


def mmse_sic(z, H, R_n, alphabet):
    """Ordered MMSE-SIC on one stream.

    At each step the remaining user with the highest SINR (lowest index on
    ties) is MMSE-estimated against the remaining users, hard-decided by
    minimum distance, and its reconstructed contribution is subtracted.

    Returns a :class:`SicResult` with ``(n, K)`` indices and estimates, the
    ``(b, K)`` detection order and the ``(b, K)`` SINR table before any
    cancellation.
    """
    z = np.atleast_2d(z)
    H = np.asarray(H)
    if H.ndim == 2:
        H = H[None]
    res = mmse_sic_streams(z[None], H[None], np.asarray(R_n)[None], alphabet)
    return SicResult(*(getattr(res, f)[0] for f in ("indices", "estimates", "order", "initial_sinr")))


def mmse_sic_streams(z, H, R_n, alphabet):
    """:func:`mmse_sic` run independently on ``S`` streams at once.

    ``z`` is ``(S, n, N_c)``, ``H`` is ``(S, b, N_c, K)`` with ``b`` either 1
    or ``n``, ``R_n`` is ``(S, N_c, N_c)``. Fields of the returned
    :class:`SicResult` gain a leading stream axis.
    """
    z = np.array(z, dtype=complex)
    H = np.asarray(H)
    S, b, Nc, K = H.shape
    n = z.shape[1]
    R = np.asarray(R_n)[:, None]
    mask = np.ones((S, b, K), dtype=bool)
    indices = np.zeros((S, n, K), dtype=int)
    estimates = np.zeros((S, n, K), dtype=complex)
    order = np.zeros((S, b, K), dtype=int)
    initial = None
    si = np.arange(S)[:, None]
    rows = np.arange(b)[None, :]
    for step in range(K):
        s, X = sinr_all(H, R, mask)
        if initial is None:
            initial = s.copy()
        u = np.argmax(s, axis=-1)  # (S, b)
        order[:, :, step] = u
        w = X[si, rows, :, u]  # (S, b, Nc)
        h = H[si, rows, :, u]
        if b == 1:
            a_hat = (z @ w[:, 0, :, None].conj())[..., 0]
            uu = np.broadcast_to(u, (S, n))
        else:
            a_hat = np.sum(w.conj() * z, axis=-1)
            uu = u
        idx = nearest_symbol(a_hat, alphabet)
        nn = np.arange(n)[None, :]
        indices[si, nn, uu] = idx
        estimates[si, nn, uu] = a_hat
        z -= h * alphabet[idx][..., None]
        mask[si, rows, u] = False
    return SicResult(indices, estimates, order, initial)


def mmse_detect(z, H, R_n, alphabet):
    """Plain (non-successive) MMSE estimates and decisions for all users."""
    W = mmse_filter(H if np.ndim(H) == 3 else H[None], R_n)
    a_hat = np.einsum("bki,ni->nk", W, z) if W.shape[0] == 1 else np.einsum("nki,ni->nk", W, z)
    return nearest_symbol(a_hat, alphabet), a_hat


# --- interference cancellation and matched filtering -------------------------------------


def cancel_interference(z, H, a, user):
    """``z - sum_{u != user} h_u a_u`` for symbol values ``a`` of shape ``(n, K)``."""
    total = a @ H[0].T if H.shape[0] == 1 else np.einsum("nik,nk->ni", H, a)
    return z - (total - H[:, :, user] * a[:, user, None])


def _cancel_all(z, H, a):
    """:func:`cancel_interference` for every stream ``m`` with ``user = m``;
    ``z`` is ``(K, n, N_c)``, ``H`` is ``(K, b, N_c, K)``."""
    K = z.shape[0]
    own = H[np.arange(K), :, :, np.arange(K)]  # (K, b, Nc)
    if H.shape[1] == 1:
        total = a @ np.swapaxes(H[:, 0], -1, -2)  # (K, n, Nc)
    else:
        total = np.einsum("mnik,nk->mni", H, a)
    return z - total + own * a.T[:, :, None]


def matched_estimate(z, h):
    """``h^H z / ||h||^2`` row-wise; ``h`` is ``(b, N_c)``."""
    return np.sum(h.conj() * z, axis=-1) / np.sum(np.abs(h) ** 2, axis=-1)


def mfb_decode(z, h, alphabet):
    """Matched filter on an interference-free observation; returns
    ``(indices, estimates)``."""
    a_hat = matched_estimate(z, np.atleast_2d(h))
    return nearest_symbol(a_hat, alphabet), a_hat


def zf_decode(z, h, alphabet):
    """Slicer for unspread streams: scalar equalisation then minimum
    distance. Identical in form to :func:`mfb_decode` but applied without
    any interference removal."""
    return mfb_decode(z, h, alphabet)


@dataclass
class PicResult:
    indices: np.ndarray
    estimates: np.ndarray
    history: list
    initial_sinr: np.ndarray
    selected_stream: np.ndarray
    stream_indices: np.ndarray = None


def pic_aided_decode(z, H, R_n, alphabet, max_iter=DEFAULT_PIC_ITERATIONS, initial=None):
    """Multi-stream MMSE-SIC with stream selection, then parallel cancellation.

    Parameters
    ----------
    z : ``(K, n, N_c)``
        Observation of every user's stream.
    H : ``(K, b, N_c, K)``
        ``H[m]`` is the equivalent channel matrix seen on stream ``m``.
    R_n : ``(K, N_c, N_c)``
        Noise correlation of each stream.
    initial : optional ``(n, K)`` indices
        Skip the MMSE-SIC stage and start the PIC rounds from these
        decisions (used for genie checks).

    Returns
    -------
    :class:`PicResult`; ``history[i]`` holds the decisions after ``i`` PIC
    rounds (``history[0]`` is the selected MMSE-SIC output) and
    ``estimates`` the soft values of the final round (``None`` when
    ``max_iter == 0``).
    """
    K, n, Nc = z.shape
    b = H.shape[1]
    decisions = None
    if initial is None:
        sic = mmse_sic_streams(z, H, R_n, alphabet)
        table = sic.initial_sinr  # (stream, b, user)
        best = np.argmax(table, axis=0)  # (b, user)
        decisions = sic.indices  # (stream, n, user)
        users = np.arange(K)
        if b == 1:
            current = decisions[best[0], :, users].T
        else:
            current = decisions[best, np.arange(n)[:, None], users[None, :]]
    else:
        table = None
        best = None
        current = np.asarray(initial).copy()

    history = [current.copy()]
    own = H[np.arange(K), :, :, np.arange(K)]  # (K, b, Nc)
    estimates = None
    for _ in range(max_iter):
        clean = _cancel_all(z, H, alphabet[current])
        estimates = matched_estimate(clean, own).T
        current = nearest_symbol(estimates, alphabet)
        history.append(current.copy())
    return PicResult(current, estimates, history, table, best, decisions)


def genie_estimates(z, H, true_indices, alphabet):
    """Per-user matched-filter outputs after removing every other user with
    the true symbols; ``(n, K)``."""
    K = z.shape[0]
    own = H[np.arange(K), :, :, np.arange(K)]
    return matched_estimate(_cancel_all(z, H, alphabet[true_indices]), own).T


def scma_mfb_posteriors(stream, codebook, true_indices, cfg=MpaConfig()):
    """Own-user posteriors after genie removal of all other SCMA users."""
    K = codebook.users
    m = stream.user
    others = np.arange(K) != m
    users = np.arange(K)[None, :]
    cw = codebook.codewords[users, true_indices]  # (n, K, Nc)
    interference = np.einsum("bik,nki->ni", stream.gains[..., others], cw[:, others]) if stream.gains.shape[0] == 1 \
        else np.einsum("nik,nki->ni", stream.gains[..., others], cw[:, others])
    clean = stream.z - interference
    noise_var = np.real(np.diag(stream.noise_cov))
    return mpa_decode(clean, stream.gains, noise_var, codebook, cfg, active=~others)[:, m]
