import math

import numpy as np
import pytest

from etisac.array import ArrayConfig
from etisac.contour import TargetPose, partition_los, preset
from etisac.crb import SensingParams, bundles_for
from etisac.design import design_isotropic, design_sdr, design_zf
from etisac.scenario import default_scenario


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    R = G @ G.conj().T
    return R / np.trace(R).real


def random_crb_case(rng, x_convention="printed"):
    """Random geometry, array sizes, K and transmit covariance."""
    name = rng.choice(["vehicle", "uav"])
    pose = TargetPose(d_o=float(rng.uniform(15, 200)), phi_o=math.radians(rng.uniform(-50, 50)),
                      varphi=math.radians(rng.uniform(-30, 30)))
    K = int(rng.integers(2, 9))
    cfg = ArrayConfig(n_t=int(rng.integers(4, 17)), n_r=int(rng.integers(4, 17)))
    part = partition_los(preset(name), pose, K=K, x_convention=x_convention)
    bnds = bundles_for(part, cfg)
    R = random_psd(rng, cfg.n_t)
    sp = SensingParams.at_distance(pose.d_o, sigma_s2=1e-11)
    return part, bnds, R, sp, cfg


@pytest.fixture(scope="session")
def default_system():
    return default_scenario().build()


@pytest.fixture(scope="session")
def sdr_result(default_system):
    return design_sdr(default_system, seed=0)


@pytest.fixture(scope="session")
def zf_result(default_system):
    return design_zf(default_system)


@pytest.fixture(scope="session")
def iso_result(default_system):
    return design_isotropic(default_system)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
