import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etisac.contour import (
    PRESETS,
    TargetPose,
    TfsContour,
    contour_intermediate,
    contour_point,
    contour_tangent,
    los_interval,
    partition_los,
    preset,
    visibility,
)
from etisac.errors import EmptyLoS

angles = st.floats(min_value=-math.pi / 3, max_value=math.pi / 3)
distances = st.floats(min_value=12.0, max_value=300.0)


def test_presets_by_name():
    assert set(PRESETS) == {"vehicle", "uav"}
    assert preset("Vehicle") is PRESETS["vehicle"]
    with pytest.raises(KeyError):
        preset("ship")


def test_invalid_first_harmonic_rejected():
    with pytest.raises(ValueError):
        TfsContour(m=(0.0, 0.1), n=(1.0, 0.0))
    with pytest.raises(ValueError):
        TfsContour(m=(1.0,), n=(1.0, 0.2))


def test_tangent_matches_finite_difference():
    c = preset("uav")
    for u in np.linspace(0, 2 * math.pi, 13):
        h = 1e-6
        fd = (contour_point(c, u + h) - contour_point(c, u - h)) / (2 * h)
        assert np.allclose(fd, contour_tangent(c, u), rtol=1e-7, atol=1e-8)


def test_los_edges_are_visibility_roots():
    c, pose = preset("vehicle"), TargetPose(27.0, 0.0)
    lo, hi = los_interval(c, pose)
    assert 0 <= lo < 2 * math.pi and hi > lo
    assert abs(visibility(c, pose, lo)) < 1e-9
    assert abs(visibility(c, pose, hi)) < 1e-9
    assert visibility(c, pose, 0.5 * (lo + hi)) > 0


def test_bs_inside_target_raises():
    with pytest.raises(EmptyLoS):
        partition_los(preset("vehicle"), TargetPose(27.0, 0.0), bs_position=(27.0, 0.0))


def test_vehicle_partition_shape():
    part = partition_los(preset("vehicle"), TargetPose(27.0, 0.0), K=8)
    assert part.K == 8
    assert np.all(part.lengths > 0)
    # near face spans a few degrees around broadside, ordered along u
    assert np.all(np.abs(part.phi) < math.radians(5))
    assert np.all(np.diff(part.u) > 0)
    assert np.all(part.d > 20)


def test_normalized_lengths_sum_to_one():
    part = partition_los(preset("uav"), TargetPose(40.0, 0.2, 0.1), K=5, normalize=True)
    assert part.lengths.sum() == pytest.approx(1.0, abs=1e-12)
    assert part.raw_lengths.sum() > 1.0


@pytest.mark.parametrize("name", ["vehicle", "uav"])
@pytest.mark.parametrize("K", [3, 8, 16])
def test_refinement_consistency(name, K):
    pose = TargetPose(30.0, 0.1, 0.05)
    a = partition_los(preset(name), pose, K=K).raw_lengths.sum()
    b = partition_los(preset(name), pose, K=2 * K).raw_lengths.sum()
    assert abs(a - b) / b <= 1e-6


@settings(max_examples=40, deadline=None)
@given(d=distances, phi=angles, varphi=angles, theta=st.floats(min_value=-0.5, max_value=0.5))
def test_visibility_rotation_invariance(d, phi, varphi, theta):
    c = preset("vehicle")
    base = partition_los(c, TargetPose(d, phi, varphi), K=4)
    rot = partition_los(c, TargetPose(d, phi + theta, varphi + theta), K=4)
    assert rot.u_lower == pytest.approx(base.u_lower, abs=1e-9)
    assert rot.u_upper == pytest.approx(base.u_upper, abs=1e-9)
    shifted = np.angle(np.exp(1j * (rot.phi - base.phi - theta)))
    assert np.allclose(shifted, 0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(d=distances, phi=angles, varphi=angles)
def test_subsections_face_the_bs(d, phi, varphi):
    c = preset("uav")
    pose = TargetPose(d, phi, varphi)
    part = partition_los(c, pose, K=6)
    assert np.all(visibility(c, pose, part.u) >= 0)
    # subsection ranges stay within the target's extent of its centre
    radius = max(np.hypot(*contour_point(c, np.linspace(0, 2 * math.pi, 256))))
    assert np.all(np.abs(part.d - d) <= radius + 1e-9)


def test_x_conventions_differ_and_validate():
    c, pose = preset("vehicle"), TargetPose(27.0, 0.3, 0.1)
    printed = contour_intermediate(c, pose, 1.0, "printed")
    geometric = contour_intermediate(c, pose, 1.0, "geometric")
    assert printed != pytest.approx(geometric)
    with pytest.raises(ValueError):
        contour_intermediate(c, pose, 1.0, "other")


def test_geometric_x_is_range_sensitivity():
    # to first order in rho / d_o: d d_k / d phi_o = X_k and d d_k / d varphi = -X_k
    from etisac.contour import global_point

    c = preset("vehicle")
    d, phi, varphi, u, h = 500.0, 0.2, 0.1, 0.4, 1e-6

    def rng_k(p, v):
        return float(np.hypot(*global_point(c, TargetPose(d, p, v), u)))

    x = contour_intermediate(c, TargetPose(d, phi, varphi), u, "geometric")
    d_phi = (rng_k(phi + h, varphi) - rng_k(phi - h, varphi)) / (2 * h)
    d_varphi = (rng_k(phi, varphi + h) - rng_k(phi, varphi - h)) / (2 * h)
    assert d_phi == pytest.approx(x, rel=1e-2)
    assert d_varphi == pytest.approx(-x, rel=1e-2)
