"""NOMA code layer: SCMA codebooks, MUSA spreading codes, chip streams.

Symbol indices are 0-based throughout (``0 .. M-1``). All schemes are
normalised to unit average chip energy, i.e. ``E ||c||^2 = N_c`` for a
codeword drawn uniformly from a user's codebook.

SCMA codebook files are JSON::

    {"code_length": 4, "alphabet_size": 4,
     "codewords": [                      # one entry per user
        [[[re, im], ...N_c chips], ...M codewords], ...],
     "bit_labels": [0, 1, 2, 3]}          # optional index -> bit label
"""

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

# raw MUSA chip alphabet before per-code scaling
MUSA_CHIPS = np.array([0, 1, 1 + 1j, 1j, -1 + 1j, -1, -1 - 1j, -1j, 1 - 1j], dtype=complex)


class CodebookError(ValueError):
    pass


def qpsk_alphabet():
    """Gray-labelled QPSK with unit average energy; index ``i`` carries bits
    ``(i >> 1, i & 1)`` on the (real, imaginary) rails."""
    i = np.arange(4)
    return ((1 - 2 * (i >> 1)) + 1j * (1 - 2 * (i & 1))) / np.sqrt(2)


def index_bits(indices, bits_per_symbol, labels=None):
    """Expand symbol indices to bits (MSB first) through an optional label table."""
    indices = np.asarray(indices)
    if labels is not None:
        indices = np.asarray(labels)[indices]
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return (indices[..., None] >> shifts) & 1


@dataclass(frozen=True)
class ScmaCodebook:
    """``codewords[u, i, r]``: chip ``r`` of codeword ``i`` of user ``u``."""

    codewords: np.ndarray
    occupancy: np.ndarray
    bit_labels: np.ndarray

    @property
    def users(self):
        return self.codewords.shape[0]

    @property
    def alphabet_size(self):
        return self.codewords.shape[1]

    @property
    def code_length(self):
        return self.codewords.shape[2]

    @property
    def users_per_resource(self):
        return int(self.occupancy.sum(axis=1).max())

    @property
    def nonzeros_per_codeword(self):
        return int(self.occupancy.sum(axis=0).max())

    def chip_power(self):
        """``E|c_u[r]|^2`` under uniform symbols, shape ``(N_c, K)``."""
        return np.mean(np.abs(self.codewords) ** 2, axis=1).T


def scma_from_arrays(codewords, bit_labels=None, tol=1e-12, normalize=True):
    """Validate a ``(K, M, N_c)`` codebook and rescale it to unit chip energy.

    Occupancy is the union of nonzero chips across a user's codewords; every
    codeword must vanish outside it and no resource may be empty for a user
    that occupies it in only some codewords.
    """
    cw = np.asarray(codewords, dtype=complex)
    if cw.ndim != 3:
        raise CodebookError(f"codewords must be (users, alphabet, code_length), got shape {cw.shape}")
    K, Mc, Nc = cw.shape
    if Mc < 2 or Mc & (Mc - 1):
        raise CodebookError(f"alphabet size {Mc} is not a power of two >= 2")
    nz = np.abs(cw) > tol
    occupancy = nz.any(axis=1).T
    for u in range(K):
        if not occupancy[:, u].any():
            raise CodebookError(f"user {u} has an all-zero codebook")
        pattern = nz[u]
        if not np.all(pattern == occupancy[:, u]):
            raise CodebookError(f"user {u}: codeword zero pattern differs from its occupancy")
    if normalize:
        cw = cw * np.sqrt(Nc / np.mean(np.sum(np.abs(cw) ** 2, axis=2)))
    labels = np.arange(Mc) if bit_labels is None else np.asarray(bit_labels, dtype=int)
    if sorted(labels.tolist()) != list(range(Mc)):
        raise CodebookError("bit_labels must be a permutation of 0..M-1")
    return ScmaCodebook(cw, occupancy.astype(int), labels)


def _scma_from_dict(d):
    try:
        cw = np.array(d["codewords"], dtype=float)
    except (KeyError, ValueError) as exc:
        raise CodebookError(f"unreadable codewords: {exc}") from exc
    if cw.ndim != 4 or cw.shape[-1] != 2:
        raise CodebookError("codewords must be nested [user][symbol][chip][re, im]")
    cw = cw[..., 0] + 1j * cw[..., 1]
    if "code_length" in d and cw.shape[2] != d["code_length"]:
        raise CodebookError(f"code_length {d['code_length']} does not match chips {cw.shape[2]}")
    if "alphabet_size" in d and cw.shape[1] != d["alphabet_size"]:
        raise CodebookError(f"alphabet_size {d['alphabet_size']} does not match {cw.shape[1]} codewords")
    return scma_from_arrays(cw, d.get("bit_labels"))


def load_scma_codebook(path=None):
    """Load a codebook file; ``None`` selects the bundled 4-chip, 6-user one."""
    if path is None:
        text = resources.files("cdnoma").joinpath("data/scma_4x6.json").read_text()
    else:
        text = Path(path).read_text()
    return _scma_from_dict(json.loads(text))


def toy_scma_codebook():
    """Bundled 2-chip, 3-user, binary codebook on a tree-shaped factor graph."""
    text = resources.files("cdnoma").joinpath("data/scma_toy.json").read_text()
    return _scma_from_dict(json.loads(text))


def save_scma_codebook(cb, path):
    cw = np.stack([cb.codewords.real, cb.codewords.imag], axis=-1)
    d = {
        "code_length": cb.code_length,
        "alphabet_size": cb.alphabet_size,
        "codewords": cw.tolist(),
        "bit_labels": cb.bit_labels.tolist(),
    }
    Path(path).write_text(json.dumps(d) + "\n")


@dataclass(frozen=True)
class MusaCodeSet:
    """Spreading codes ``codes[u]`` (``||s||^2 = N_c``) and a modulation alphabet."""

    codes: np.ndarray
    alphabet: np.ndarray

    @property
    def users(self):
        return self.codes.shape[0]

    @property
    def code_length(self):
        return self.codes.shape[1]

    @property
    def alphabet_size(self):
        return self.alphabet.size

    def chip_power(self):
        return (np.abs(self.codes) ** 2).T


def generate_musa_codes(code_length, users, rng, alphabet=None):
    """Draw distinct, nonzero spreading codes with i.i.d. entries from the
    9-point set ``{0, +-1, +-j, +-1+-j}``, each then scaled to
    ``||s||^2 = N_c``."""
    if code_length < 1:
        raise ValueError("code_length must be >= 1")
    if users > 9**code_length - 1:
        raise ValueError(f"cannot draw {users} distinct nonzero codes of length {code_length}")
    raw = []
    seen = set()
    while len(raw) < users:
        idx = rng.integers(0, 9, size=code_length)
        key = tuple(idx.tolist())
        if not idx.any() or key in seen:
            continue
        seen.add(key)
        raw.append(MUSA_CHIPS[idx])
    codes = np.array(raw)
    codes *= np.sqrt(code_length / np.sum(np.abs(codes) ** 2, axis=1, keepdims=True))
    return MusaCodeSet(codes, qpsk_alphabet() if alphabet is None else np.asarray(alphabet))


def unspread_codes(users, alphabet=None):
    """Code set for plain (non-NOMA) transmission: length-1 unit codes."""
    return MusaCodeSet(np.ones((users, 1), dtype=complex), qpsk_alphabet() if alphabet is None else alphabet)


def save_musa_codes(codes, path):
    d = {
        "codes": np.stack([codes.codes.real, codes.codes.imag], axis=-1).tolist(),
        "alphabet": np.stack([codes.alphabet.real, codes.alphabet.imag], axis=-1).tolist(),
    }
    Path(path).write_text(json.dumps(d) + "\n")


def load_musa_codes(path):
    d = json.loads(Path(path).read_text())
    c = np.array(d["codes"], dtype=float)
    a = np.array(d["alphabet"], dtype=float)
    return MusaCodeSet(c[..., 0] + 1j * c[..., 1], a[..., 0] + 1j * a[..., 1])


def map_symbols(indices, codebook):
    """Codewords for symbol indices ``(K, N_s)`` -> ``(K, N_s, N_c)``."""
    indices = np.asarray(indices)
    M = codebook.alphabet_size
    if indices.size and (indices.min() < 0 or indices.max() >= M):
        raise IndexError(f"symbol index outside [0, {M})")
    if isinstance(codebook, ScmaCodebook):
        users = np.arange(indices.shape[0])[:, None]
        return codebook.codewords[users, indices]
    return codebook.codes[:, None, :] * codebook.alphabet[indices][..., None]


def assemble_chips(codewords):
    """Concatenate each user's codewords: ``b[u, k N_c + i] = c[u, k, i]``."""
    codewords = np.asarray(codewords)
    return codewords.reshape(codewords.shape[0], -1)


def split_chips(chips, code_length):
    """Inverse of :func:`assemble_chips`."""
    chips = np.asarray(chips)
    return chips.reshape(chips.shape[0], -1, code_length)


def random_symbols(rng, users, n_symbols, alphabet_size):
    return rng.integers(0, alphabet_size, size=(users, n_symbols))


def pattern_matrix(codebook, n_resources):
    """Binary activity ``P[k, u]`` of user ``u`` on resource ``k`` (periodic
    with the code length)."""
    occ = np.abs(codebook.chip_power()) > 0
    reps = n_resources // occ.shape[0]
    return np.tile(occ, (reps, 1)).astype(int)


def resource_chip_power(codebook, n_resources):
    """``E|b_k^(u)|^2`` on each of ``n_resources`` consecutive resources."""
    p = codebook.chip_power()
    return np.tile(p, (n_resources // p.shape[0], 1))
