"""Covariance-based wideband mm-wave channel for a uniform linear array.

Each user has a handful of active delay taps (MPCs). Tap ``l`` of user
``m`` is a zero-mean complex Gaussian vector whose covariance integrates
the outer product of steering vectors over the MPC's angular support.
Angles are in degrees at every public interface.
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

QUADRATURE_NODES = 64
SQRT_FLOOR = 1e-12


def steering_vector(theta, M):
    """Unit-norm half-wavelength ULA response at azimuth ``theta`` (degrees).

    ``theta`` may be an array; the antenna index is then the last axis.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= 90):
        raise ValueError("steering angle must satisfy |theta| < 90 degrees")
    m = np.arange(M)
    phase = np.pi * np.sin(np.deg2rad(theta))[..., None] * m
    return np.exp(1j * phase) / np.sqrt(M)


def build_ccm(mean_aoa, angular_spread, trace, M, nodes=QUADRATURE_NODES):
    """Covariance of one MPC with a uniform angular power profile.

    The angular integral is a midpoint rule with ``nodes`` points across
    ``[mean_aoa - spread/2, mean_aoa + spread/2]``. Every steering vector has
    unit norm, so the trace equals ``trace`` up to rounding. The result is
    Hermitian Toeplitz and is assembled from its first column.
    """
    offsets = (np.arange(nodes) + 0.5) / nodes - 0.5
    thetas = mean_aoa + angular_spread * offsets
    s = np.sin(np.deg2rad(thetas))
    k = np.arange(M)
    col = np.exp(1j * np.pi * np.outer(k, s)).sum(axis=1) * (trace / (nodes * M))
    return linalg.toeplitz(col, col.conj())


def covariance_sqrt(R):
    """Return ``F`` with ``F F^H = R`` for a (numerically) PSD matrix.

    Cholesky is tried first; rank-deficient matrices fall back to an
    eigendecomposition with eigenvalues below ``1e-12 * trace`` zeroed.
    """
    try:
        return linalg.cholesky(R, lower=True)
    except linalg.LinAlgError:
        w, V = linalg.eigh(R)
        floor = SQRT_FLOOR * max(np.real(np.trace(R)), 0.0)
        w = np.where(w > floor, w, 0.0)
        return V * np.sqrt(w)


@dataclass
class CovarianceSet:
    """CCMs of every user of every group.

    ``ccms[g]`` has shape ``(K_g, n_mpc_g, M, M)`` and ``delays[g]`` lists the
    tap index of each of the group's MPCs.
    """

    delays: list
    ccms: list
    total_delays: int
    _factors: list = field(default=None, repr=False)

    @property
    def antennas(self):
        return self.ccms[0].shape[-1]

    @property
    def users(self):
        return [c.shape[0] for c in self.ccms]

    def factors(self):
        if self._factors is None:
            self._factors = [
                np.array([[covariance_sqrt(R) for R in user] for user in group]) for group in self.ccms
            ]
        return self._factors

    def group_sum(self, g):
        """``R_sum^(g)``: all users and all MPCs of group ``g``."""
        return self.ccms[g].sum(axis=(0, 1))

    def per_delay(self, g):
        """``R_l^(g)`` for each active MPC of group ``g``, shape ``(n_mpc, M, M)``."""
        return self.ccms[g].sum(axis=0)


def build_covariances(cfg, angles, nodes=QUADRATURE_NODES):
    """CCMs for scenario ``cfg`` given per-user mean AoAs from
    :func:`cdnoma.scenario.draw_user_angles`."""
    M = cfg.antennas
    ccms = []
    for g, mu in zip(cfg.groups, angles):
        arr = np.empty((g.users, len(g.mpcs), M, M), dtype=complex)
        for m in range(g.users):
            for i, p in enumerate(g.mpcs):
                arr[m, i] = build_ccm(mu[m, i], p.angular_spread, p.gain_fraction * g.channel_gain, M, nodes)
        ccms.append(arr)
    return CovarianceSet([g.delays for g in cfg.groups], ccms, cfg.total_delays)


def cached_covariances(cfg, angles, cache_dir=None, nodes=QUADRATURE_NODES):
    """Like :func:`build_covariances` but backed by an ``.npz`` file keyed by
    a digest of the scenario and the drawn angles. Missing files are built
    and written."""
    if cache_dir is None:
        return build_covariances(cfg, angles, nodes)
    from .scenario import config_hash

    h = hashlib.sha256(config_hash(cfg).encode())
    h.update(str(nodes).encode())
    for a in angles:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    path = Path(cache_dir) / f"ccm_{h.hexdigest()[:20]}.npz"
    if path.exists():
        with np.load(path) as data:
            ccms = [data[f"g{i}"] for i in range(len(cfg.groups))]
        return CovarianceSet([g.delays for g in cfg.groups], ccms, cfg.total_delays)
    cs = build_covariances(cfg, angles, nodes)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{f"g{i}": c for i, c in enumerate(cs.ccms)})
    return cs


@dataclass
class ChannelRealization:
    """``taps[g][l]`` is ``H_l^(g)`` (``M x K_g``); inactive taps are zero."""

    taps: list

    @property
    def total_delays(self):
        return self.taps[0].shape[0]


def complex_normal(rng, shape):
    """Circularly-symmetric standard complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def sample_channels(cs, rng):
    """One correlated-Rayleigh draw ``h = R^{1/2} w`` for every user and MPC."""
    taps = []
    M = cs.antennas
    for delays, F in zip(cs.delays, cs.factors()):
        K, P = F.shape[:2]
        w = complex_normal(rng, (K, P, M))
        h = np.einsum("kpij,kpj->kpi", F, w)
        H = np.zeros((cs.total_delays, M, K), dtype=complex)
        for i, d in enumerate(delays):
            H[d] = h[:, i, :].T
        taps.append(H)
    return ChannelRealization(taps)


def received_covariance(cs, energies, n0=1.0):
    """``R_y = sum_g E_s^(g)/K_g * R_sum^(g) + N_0 I``."""
    M = cs.antennas
    Ry = n0 * np.eye(M, dtype=complex)
    for g, Es in enumerate(energies):
        Ry += (Es / cs.users[g]) * cs.group_sum(g)
    return Ry
