import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdnoma.channel import (
    CovarianceSet,
    build_ccm,
    build_covariances,
    cached_covariances,
    covariance_sqrt,
    received_covariance,
    sample_channels,
    steering_vector,
)
from cdnoma.numerics import hermitian_eig
from cdnoma.scenario import default_scenario, draw_user_angles


def fro_rel(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(B)


def single_set(R):
    M = R.shape[0]
    return CovarianceSet([np.array([0])], [R.reshape(1, 1, M, M)], 1)


def test_steering_examples():
    assert np.allclose(steering_vector(0.0, 4), np.ones(4) / 2)
    assert np.allclose(steering_vector(30.0, 2), np.array([1, 1j]) / np.sqrt(2))
    for th in (-89.0, -33.3, 0.0, 12.0, 75.0):
        assert abs(np.linalg.norm(steering_vector(th, 100)) - 1) < 1e-12
    with pytest.raises(ValueError):
        steering_vector(90.0, 4)


def test_point_source_limit():
    R = build_ccm(10.0, 3.0, 2.0, 16, nodes=1)
    u = steering_vector(10.0, 16)
    assert np.allclose(R, 2.0 * np.outer(u, u.conj()), atol=1e-12)


def test_ccm_trace_toeplitz_and_refined_quadrature():
    R = build_ccm(0.0, 3.0, 1.0, 64)
    assert np.allclose(R, R.conj().T)
    assert abs(np.trace(R).real - 1.0) < 1e-6
    # Toeplitz
    assert np.allclose(R[1:, 1:], R[:-1, :-1])
    fine = build_ccm(0.0, 3.0, 1.0, 64, nodes=640)
    assert fro_rel(R, fine) < 1e-3
    # independent brute-force sum of steering outer products
    th = np.linspace(-1.5, 1.5, 4001)
    U = steering_vector(th, 64)
    brute = np.einsum("tm,tn->mn", U, U.conj()) / th.size
    assert fro_rel(fine, brute) < 1e-3


def test_disjoint_sectors_near_orthogonal():
    a = hermitian_eig(build_ccm(-20.0, 3.0, 1.0, 100)).vectors[:, 0]
    b = hermitian_eig(build_ccm(20.0, 3.0, 1.0, 100)).vectors[:, 0]
    assert abs(a.conj() @ b) < 0.1


def test_sqrt_rank_deficient_fallback():
    u = steering_vector(5.0, 8)
    R = np.outer(u, u.conj())
    F = covariance_sqrt(R)
    assert np.allclose(F @ F.conj().T, R, atol=1e-10)


def test_zero_covariance_gives_zero_channel():
    H = sample_channels(single_set(np.zeros((4, 4), complex)), np.random.default_rng(0))
    assert np.all(H.taps[0] == 0)


@pytest.mark.parametrize("which", ["identity", "general"])
def test_sample_covariance(which):
    M = 6
    R = np.eye(M, dtype=complex) if which == "identity" else build_ccm(5.0, 20.0, 3.0, M) + 0.1 * np.eye(M)
    cs = single_set(R)
    rng = np.random.default_rng(11)
    h = np.stack([sample_channels(cs, rng).taps[0][0, :, 0] for _ in range(10000)])
    emp = h.T @ h.conj() / h.shape[0]
    assert fro_rel(emp, R) < 0.05
    assert np.linalg.norm(h.mean(axis=0)) < 0.05 * np.sqrt(np.trace(R).real)


def test_sampling_deterministic():
    cfg = default_scenario().replace(antennas=16)
    cs = build_covariances(cfg, draw_user_angles(cfg, np.random.default_rng(0)))
    a = sample_channels(cs, np.random.default_rng(5)).taps
    b = sample_channels(cs, np.random.default_rng(5)).taps
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_received_covariance_examples():
    M = 5
    cs = single_set(np.zeros((M, M), complex))
    assert np.allclose(received_covariance(cs, [0.0], n0=1.3), 1.3 * np.eye(M))
    R = build_ccm(0.0, 3.0, 1.0, M)
    assert np.allclose(received_covariance(single_set(R), [1.0], n0=0.7), R + 0.7 * np.eye(M))


def test_received_covariance_table_geometry():
    cfg = default_scenario()
    cs = build_covariances(cfg, draw_user_angles(cfg, np.random.default_rng(1)))
    Ry = received_covariance(cs, [60.0] * 4, 1.0)
    assert hermitian_eig(Ry).values[-1] >= 1.0 - 1e-9
    assert hermitian_eig(Ry - np.eye(cfg.antennas)).values[-1] >= -1e-9 * np.trace(Ry).real


def test_cache_round_trip(tmp_path):
    cfg = default_scenario().replace(antennas=12)
    ang = draw_user_angles(cfg, np.random.default_rng(2))
    a = cached_covariances(cfg, ang, tmp_path)
    assert len(list(tmp_path.glob("ccm_*.npz"))) == 1
    b = cached_covariances(cfg, ang, tmp_path)
    assert all(np.array_equal(x, y) for x, y in zip(a.ccms, b.ccms))


@settings(max_examples=40, deadline=None)
@given(
    mu=st.floats(-70, 70),
    spread=st.floats(0.1, 15),
    trace=st.floats(0.01, 10),
    M=st.integers(1, 48),
)
def test_prop_ccm_psd_with_trace(mu, spread, trace, M):
    R = build_ccm(mu, spread, trace, M)
    assert np.allclose(R, R.conj().T, atol=1e-12 * trace)
    w = np.linalg.eigvalsh(R)
    assert w.min() >= -1e-10 * trace
    assert abs(np.trace(R).real - trace) <= 1e-6 * trace


def test_cross_user_and_delay_decorrelation():
    cfg = default_scenario().replace(antennas=8)
    cs = build_covariances(cfg, draw_user_angles(cfg, np.random.default_rng(3)))
    rng = np.random.default_rng(4)
    n = 10000
    g0 = np.stack([sample_channels(cs, rng).taps[0] for _ in range(n)])  # (n, L, M, K)
    d = cfg.groups[0].delays
    a = g0[:, d[0], :, 0]
    b = g0[:, d[0], :, 1]  # other user, same delay
    c = g0[:, d[1], :, 0]  # same user, other delay
    scale = np.sqrt(np.mean(np.sum(np.abs(a) ** 2, 1)) * np.mean(np.sum(np.abs(b) ** 2, 1)))
    for other in (b, c):
        cross = a.T @ other.conj() / n
        assert np.linalg.norm(cross) < 0.05 * scale
    assert np.linalg.norm(a.mean(axis=0)) < 0.05 * np.sqrt(scale)
