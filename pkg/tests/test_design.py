import math

import numpy as np
import pytest

from etisac.array import sinr_all
from etisac.conic import solve_conic
from etisac.design import (
    RANK_ONE_TOL,
    build_sdr_problem,
    build_zf_problem,
    check_constraints,
    design_isotropic,
    design_sdr,
    design_zf,
    extract_rank_one,
    zf_components,
)
from etisac.errors import AllInfeasible, ExtractionFailed, Infeasible, RankDeficient
from etisac.scenario import default_scenario


@pytest.fixture(scope="module")
def small_system():
    return default_scenario(n_t=8, n_r=8, k=4, dirs_deg=[-50.0, 30.0], gamma_db=6.0, channel_seed=3).build()


def _assert_feasible(system, res):
    cons = system.constraints
    assert np.all(res.sinrs >= cons.gamma * (1 - 1e-6))
    assert res.beamformers.power <= cons.p_t + 1e-9
    assert check_constraints(system, res.beamformers.W)["coverage_residual"] >= -1e-9 * cons.p_t


def test_sdr_default_scenario(default_system, sdr_result, iso_result, zf_result):
    _assert_feasible(default_system, sdr_result)
    assert np.all(10 * np.log10(sdr_result.sinrs) >= 10 - 1e-5)
    assert sdr_result.report.crb_phi <= iso_result.report.crb_phi
    assert sdr_result.report.crb_phi <= zf_result.report.crb_phi
    # achieved bound sits on the relaxed one up to extraction round-off
    assert sdr_result.report.crb_phi == pytest.approx(sdr_result.info["relaxed_crb_phi"], rel=1e-4)
    assert sdr_result.report.crb_phi >= sdr_result.info["relaxed_crb_phi"] * (1 - 1e-6)


def test_zf_default_scenario(default_system, zf_result):
    _assert_feasible(default_system, zf_result)
    ks = zf_result.info["direction_set"]
    assert len(ks) == default_system.n_users and ks == sorted(ks)
    assert zf_result.info["sets_tried"] == math.comb(8, 4)


def test_isotropic_baseline_flat(default_system, iso_result):
    W = iso_result.beamformers.W
    assert iso_result.beamformers.power == pytest.approx(default_system.constraints.p_t)
    pattern = check_constraints(default_system, W)["pattern"]
    assert np.allclose(pattern, default_system.constraints.p_t)


def test_sdr_problem_structure(small_system):
    p = build_sdr_problem(small_system)
    n_t, n_c, K = 8, 2, 4
    assert p.n_real_dof == n_c * n_t**2 + 1
    assert p.n_rows("coverage") == K * K
    assert p.n_rows("sinr") == n_c
    assert p.n_rows("schur") == 4
    assert set(p.groups) == {"psd", "power", "sinr", "coverage", "schur"}
    assert "A" in p.dump_text()


def test_coverage_can_be_disabled(small_system):
    p = build_sdr_problem(small_system, coverage=False)
    assert p.n_rows("coverage") == 0
    free = solve_conic(p, tol=1e-7).objective
    bound = solve_conic(build_sdr_problem(small_system), tol=1e-7).objective
    assert free >= bound * (1 - 1e-6)


def test_small_sdr_and_zf(small_system):
    sdr, zf = design_sdr(small_system), design_zf(small_system)
    _assert_feasible(small_system, sdr)
    _assert_feasible(small_system, zf)
    assert zf.report.crb_phi >= sdr.report.crb_phi * (1 - 1e-6)


def test_rank_one_solution_skips_extraction(small_system):
    res = design_sdr(small_system)
    if max(res.info["rank_ratios"]) <= RANK_ONE_TOL:
        assert res.info["extracted"] is False
    else:
        assert res.info["extracted"] is True and res.info["attempts"] >= 1


def test_extraction_equalizes_sinr(small_system):
    p = build_sdr_problem(small_system)
    solve_conic(p, tol=1e-7)
    R = [0.5 * (v.value + v.value.conj().T) for v in p.variables["R"]]
    relaxed = float(sum(np.trace(x).real for x in R))
    bf, _ = extract_rank_one(R, small_system, seed=1, relaxed_power=relaxed, principal_first=False)
    s = sinr_all(small_system.channel.H, bf.W, small_system.constraints.sigma_n2)
    assert np.allclose(s, small_system.constraints.gamma, rtol=1e-9)
    assert bf.power <= relaxed + 1e-9


def test_extraction_gives_up(small_system):
    R = [np.eye(8) * 1e-3 for _ in range(2)]
    with pytest.raises(ExtractionFailed):
        extract_rank_one(R, small_system, seed=0, relaxed_power=1e-6, max_attempts=5)


def test_infeasible_sinr_is_classified():
    system = default_scenario(gamma_db=40.0).build()
    with pytest.raises(Infeasible) as exc:
        design_sdr(system)
    assert exc.value.constraint_class == "sinr"
    with pytest.raises(AllInfeasible) as exc:
        design_zf(system)
    assert exc.value.constraint_class == "sinr"


def test_zf_projector_and_nulling():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    zf = zf_components(H)
    assert np.allclose(H @ zf.H_pinv, np.eye(3), atol=1e-12)
    assert np.abs(H @ zf.P_perp).max() < 1e-12
    assert np.allclose(zf.P_perp @ zf.P_perp, zf.P_perp, atol=1e-12)


def test_zf_rank_deficient():
    H = np.ones((2, 4), dtype=complex)
    with pytest.raises(RankDeficient):
        zf_components(H)


def test_zf_problem_reuses_compiled_structure(small_system):
    zf = zf_components(small_system.channel.H)
    p = build_zf_problem(small_system, zf, (0, 1))
    assert p.n_real_dof == 4 * small_system.n_users + 1
    assert p.meta["direction_set"] == (0, 1)
    with pytest.raises(ValueError):
        build_zf_problem(small_system, zf, (0,))


def test_sdr_dominates_isotropic_on_random_scenarios():
    for seed in range(3):
        system = default_scenario(n_t=8, n_r=8, k=4, dirs_deg=[-45.0, 40.0], gamma_db=3.0, channel_seed=seed).build()
        assert design_sdr(system).report.crb_phi <= design_isotropic(system).report.crb_phi
