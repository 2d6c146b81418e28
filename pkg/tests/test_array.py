import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etisac.array import (
    ArrayConfig,
    beampattern,
    check_psd,
    covariance,
    db2lin,
    dbm2watt,
    gen_channel,
    sinr_all,
    steering,
    steering_derivative,
    sum_rate,
    z1,
)
from etisac.errors import NotPSD

phis = st.floats(min_value=-math.radians(80), max_value=math.radians(80))
sizes = st.integers(min_value=1, max_value=24)


@given(n=sizes, phi=phis)
def test_unit_modulus_and_norm(n, phi):
    a = steering(n, phi)
    assert np.allclose(np.abs(a), 1.0)
    assert np.vdot(a, a).real == pytest.approx(n)


@given(n=sizes, phi=phis)
def test_derivative_orthogonal_in_real_part(n, phi):
    cfg = ArrayConfig(n_t=n, n_r=n)
    a, ad = steering(n, phi), steering_derivative(cfg, phi, "tx")
    assert abs(np.vdot(ad, a).real) <= 1e-9 * n


@settings(max_examples=50)
@given(n=st.integers(min_value=2, max_value=24), phi=phis)
def test_derivative_norm_is_n_z1(n, phi):
    cfg = ArrayConfig(n_t=n, n_r=n)
    bd = steering_derivative(cfg, phi, "rx")
    assert np.vdot(bd, bd).real == pytest.approx(n * z1(n, phi), rel=1e-12)


def test_derivative_finite_difference_at_03():
    cfg = ArrayConfig(n_t=16, n_r=16)
    h = 1e-6
    fd = (steering(16, 0.3 + h) - steering(16, 0.3 - h)) / (2 * h)
    assert np.linalg.norm(fd - steering_derivative(cfg, 0.3)) / np.linalg.norm(fd) < 1e-6


def test_steering_vectorized_shape():
    assert steering(5, np.zeros(7)).shape == (5, 7)
    assert steering(5, 0.0).shape == (5,)
    assert np.allclose(steering(5, 0.0), 1)


def test_unit_conversions():
    assert db2lin(10) == pytest.approx(10)
    assert dbm2watt(-80) == pytest.approx(1e-11)


def test_channel_reproducible_and_scaled():
    cfg = ArrayConfig()
    a = gen_channel(cfg, np.radians([-60, 35]), 100.0, seed=3)
    b = gen_channel(cfg, np.radians([-60, 35]), 100.0, seed=3)
    assert np.array_equal(a.H, b.H)
    assert a.H.shape == (2, 16)
    assert np.allclose(a.path_dirs[:, 0], np.radians([-60, 35]))
    assert np.allclose(a.path_powers.sum(axis=1), 1.0)


def test_channel_mean_gain():
    cfg = ArrayConfig(n_t=8, n_r=8)
    gains = [np.sum(np.abs(gen_channel(cfg, [0.3], 20.0, seed=s).H) ** 2) for s in range(4000)]
    # E ||h||^2 = N_t * 10^(-PL/10)
    assert np.mean(gains) == pytest.approx(8 * 1e-2, rel=0.05)


def test_nlos_channel_has_random_first_path():
    cfg = ArrayConfig()
    ch = gen_channel(cfg, [0.0], 100.0, los_fraction=None, seed=1)
    assert ch.path_dirs[0, 0] != 0.0
    assert np.allclose(ch.path_powers, 1 / 6)


def test_single_path_channel():
    ch = gen_channel(ArrayConfig(), [0.2], 0.0, L=1, seed=0)
    assert ch.path_powers.shape == (1, 1) and ch.path_powers[0, 0] == 1.0


def test_sinr_and_rate():
    H = np.array([[1.0, 0.0], [0.0, 2.0]], dtype=complex)
    W = np.eye(2, dtype=complex)
    s = sinr_all(H, W, 1.0)
    assert np.allclose(s, [1.0, 4.0])
    assert sum_rate(s) == pytest.approx(1.0 + math.log2(5))


def test_beampattern_nonnegative_and_grid():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3))
    grid = np.radians(np.arange(-90, 91))
    p = beampattern(covariance(W), ArrayConfig(), grid)
    assert p.shape == (181,) and np.all(p >= 0)


def test_isotropic_pattern_is_flat():
    p = beampattern(np.eye(16) / 16, ArrayConfig(), np.linspace(-1.5, 1.5, 50))
    assert np.allclose(p, 1.0)


def test_check_psd_rejects_indefinite():
    with pytest.raises(NotPSD):
        check_psd(np.diag([1.0, -0.5]))
    with pytest.raises(NotPSD):
        check_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))
    check_psd(np.diag([1.0, 0.0]))
