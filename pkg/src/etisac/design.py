"""Transmit beamforming that minimizes the target-direction CRB.

Internally every problem is posed in normalized units: covariances are divided
by ``P_t`` and channels multiplied by ``sqrt(P_t / sigma_n^2)``, so the power
budget and the noise floor are both one. Results are mapped back before they
leave this module.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .array import covariance, sinr_all, sum_rate
from .conic import ConicProblem, solve_conic
from .crb import CrbReport, crb_et
from .errors import (
    AllInfeasible,
    ExtractionFailed,
    Infeasible,
    IsacError,
    NegativePower,
    RankDeficient,
    SolverFailure,
)
from .system import DesignConstraints, IsacSystem

log = logging.getLogger(__name__)

__all__ = [
    "BeamformerSet",
    "ZfComponents",
    "DesignResult",
    "build_sdr_problem",
    "extract_rank_one",
    "design_sdr",
    "zf_components",
    "build_zf_problem",
    "set_direction_set",
    "design_zf",
    "design_isotropic",
    "check_constraints",
    "RANK_ONE_TOL",
]

RANK_ONE_TOL = 1e-6
# Tightening applied inside the solver so solutions clear the acceptance
# tolerances after round-off.
POWER_MARGIN = 1e-9
SINR_MARGIN = 1e-7
COVERAGE_MARGIN = 1e-7
MAX_DIRECTION_SETS = 100_000


@dataclass
class BeamformerSet:
    W: np.ndarray

    @property
    def w(self) -> list:
        return [self.W[:, n] for n in range(self.W.shape[1])]

    @property
    def R_n(self) -> list:
        return [np.outer(w, w.conj()) for w in self.w]

    @property
    def R_x(self) -> np.ndarray:
        return covariance(self.W)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))


@dataclass
class ZfComponents:
    H_pinv: np.ndarray
    P_perp: np.ndarray


@dataclass
class DesignResult:
    method: str
    beamformers: BeamformerSet
    report: CrbReport
    sinrs: np.ndarray
    sum_rate: float
    info: dict = field(default_factory=dict)


def _pattern_matrices(system: IsacSystem):
    A = np.column_stack([b.a for b in system.bundles])
    Ad = np.column_stack([b.a_dot for b in system.bundles])
    return A, Ad


def _t_unit(system: IsacSystem) -> float:
    """Value of one unit of the solver's epigraph variable in physical units."""
    l = system.partition.lengths
    return _crb_scale(system) * float(l.sum()) * system.constraints.p_t


def _crb_scale(system: IsacSystem) -> float:
    n_t = system.cfg.n_t
    z1_max = max(b.Z1 for b in system.bundles)
    return n_t * (z1_max + math.pi**2 * (n_t**2 - 1) / 12.0)


def _sensing_constraints(prob: ConicProblem, A, D, C, t, system: IsacSystem, coverage: bool):
    """Coverage rows and the 2x2 Schur block shared by the SDR and ZF problems."""
    l = system.partition.lengths
    K = len(l)
    Z1 = np.array([b.Z1 for b in system.bundles])
    n_t = system.cfg.n_t
    if coverage:
        # 2 min_k A_k - max_k A_k >= 0  <=>  2 A_i - A_j >= 0 for all (i, j)
        prob.add("coverage", [(2 * A[i] - A) / n_t >= COVERAGE_MARGIN for i in range(K)])
    s = _crb_scale(system)
    # sum_k l_k P_k with the -t/(K l_k) shifts collapsed into a single -t;
    # t is carried in units of s so the objective is O(1)
    lw = l / l.sum()
    top = cp.sum(cp.multiply(lw * Z1 / s, A)) + (lw / s) @ D - t
    off = (lw / s) @ C
    bottom = (lw / s) @ A
    P = cp.bmat([[top, off], [off, bottom]])
    prob.add("schur", [P >> 0])


def build_sdr_problem(system: IsacSystem, coverage=None) -> ConicProblem:
    """Relaxed problem over ``N_c`` Hermitian PSD covariances and the epigraph ``t``."""
    cons = system.constraints
    coverage = cons.coverage if coverage is None else coverage
    n_t, n_c = system.cfg.n_t, system.n_users
    H = system.H_scaled
    gamma = cons.gamma
    A_mat, Ad_mat = _pattern_matrices(system)

    R = [cp.Variable((n_t, n_t), hermitian=True, name=f"R{n}") for n in range(n_c)]
    t = cp.Variable(name="t")
    Rx = sum(R)
    A = cp.real(cp.diag(A_mat.conj().T @ Rx @ A_mat))
    D = cp.real(cp.diag(Ad_mat.conj().T @ Rx @ Ad_mat))
    C = cp.real(cp.diag(Ad_mat.conj().T @ Rx @ A_mat))

    prob = ConicProblem(objective=t, variables={"R": R, "t": t}, meta={"kind": "sdr", "scale": cons.p_t})
    prob.add("psd", [Rn >> 0 for Rn in R])
    prob.add("power", [cp.real(cp.trace(Rx)) <= 1.0 - POWER_MARGIN])
    sinr_rows = []
    g = gamma * (1 + SINR_MARGIN)
    for n in range(n_c):
        h = H[n].conj()
        own = cp.real(h.conj() @ R[n] @ h)
        tot = cp.real(h.conj() @ Rx @ h)
        sinr_rows.append((1 + 1 / g) * own >= tot + 1.0)
    prob.add("sinr", sinr_rows)
    _sensing_constraints(prob, A, D, C, t, system, coverage)
    return prob


def check_constraints(system: IsacSystem, W: np.ndarray) -> dict:
    """Residuals of power, SINR and coverage for a concrete beamformer matrix."""
    cons = system.constraints
    R = covariance(W)
    A_mat, _ = _pattern_matrices(system)
    pattern = np.einsum("ik,ij,jk->k", A_mat.conj(), R, A_mat).real
    sinrs = sinr_all(system.channel.H, W, cons.sigma_n2)
    return {
        "power": float(np.trace(R).real),
        "power_residual": float(cons.p_t - np.trace(R).real),
        "sinrs": sinrs,
        "sinr_ratio_min": float(np.min(sinrs) / cons.gamma),
        "coverage_residual": float(2 * pattern.min() - pattern.max()),
        "pattern": pattern,
    }


def _feasible(system: IsacSystem, W: np.ndarray, coverage: bool) -> bool:
    chk = check_constraints(system, W)
    p_t = system.constraints.p_t
    ok = chk["power_residual"] >= -1e-9 and chk["sinr_ratio_min"] >= 1 - 1e-6
    if coverage:
        ok = ok and chk["coverage_residual"] >= -1e-9 * p_t
    return bool(ok)


def _span_draw(R: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lam, U = np.linalg.eigh(R)
    root = (U * np.sqrt(np.clip(lam, 0.0, None))) @ U.conj().T
    v = (rng.standard_normal(R.shape[0]) + 1j * rng.standard_normal(R.shape[0])) / math.sqrt(2)
    u = root @ v
    return u / np.linalg.norm(u)


def _power_solve(H: np.ndarray, U: np.ndarray, gamma: float, sigma_n2: float) -> np.ndarray:
    """Powers that put every SINR exactly at ``gamma`` for fixed unit directions ``U``."""
    G = np.abs(H @ U) ** 2  # G[n, i] = |h_n^H u_i|^2
    F = -gamma * G
    np.fill_diagonal(F, np.diag(G))
    eta = np.full(H.shape[0], gamma * sigma_n2)
    q = np.linalg.solve(F, eta)
    if np.any(q < 0):
        raise NegativePower(f"power solve gave a negative entry ({q.min():.3e})")
    return q


def extract_rank_one(R_list, system: IsacSystem, seed=None, max_attempts=None,
                     relaxed_power=None, coverage=None, principal_first=True) -> tuple:
    """Randomized rank-one extraction with exact SINR equalization.

    Each attempt draws ``u_n`` from the span of ``R_n``, solves the linear
    system that sets every SINR to ``Gamma`` and accepts the draw when the
    resulting power stays within the relaxed power and, if requested, the
    coverage condition holds. With ``principal_first`` the first attempt uses the
    principal eigenvectors instead of a random draw. Returns
    ``(BeamformerSet, attempts_used)``.
    """
    cons = system.constraints
    coverage = cons.coverage if coverage is None else coverage
    max_attempts = system.max_attempts if max_attempts is None else max_attempts
    if relaxed_power is None:
        relaxed_power = float(sum(np.trace(R).real for R in R_list))
    rng = np.random.default_rng(seed)
    H = system.channel.H
    last = "no attempts made"
    for attempt in range(1, max_attempts + 1):
        if attempt == 1 and principal_first:
            U = np.column_stack([np.linalg.eigh(R)[1][:, -1] for R in R_list])
        else:
            U = np.column_stack([_span_draw(R, rng) for R in R_list])
        try:
            q = _power_solve(H, U, cons.gamma, cons.sigma_n2)
        except (NegativePower, np.linalg.LinAlgError) as exc:
            last = str(exc)
            continue
        W = U * np.sqrt(q)
        power = float(q.sum())
        if power > relaxed_power + 1e-9 * max(1.0, relaxed_power):
            last = f"power {power:.6e} exceeds relaxed power {relaxed_power:.6e}"
            continue
        if coverage:
            chk = check_constraints(system, W)
            if chk["coverage_residual"] < -1e-9 * cons.p_t:
                last = "coverage constraint violated"
                continue
        return BeamformerSet(W), attempt
    raise ExtractionFailed(f"no valid rank-one draw in {max_attempts} attempts ({last})")


def _diagnose(system: IsacSystem, builder) -> str:
    """Name the constraint family that makes the problem infeasible."""
    if not system.constraints.coverage:
        return "sinr"
    try:
        solve_conic(builder(system, coverage=False), tol=system.tol, max_iter=system.max_iter)
    except Infeasible:
        return "sinr"
    except SolverFailure:
        return "unknown"
    return "coverage"


def _finish(method: str, system: IsacSystem, W: np.ndarray, info: dict) -> DesignResult:
    cons = system.constraints
    report = crb_et(system.partition, system.bundles, covariance(W), system.sensing)
    sinrs = sinr_all(system.channel.H, W, cons.sigma_n2)
    chk = check_constraints(system, W)
    info = dict(info)
    info.update({
        "power": chk["power"],
        "coverage_residual": chk["coverage_residual"],
        "sinr_ratio_min": chk["sinr_ratio_min"],
    })
    return DesignResult(method=method, beamformers=BeamformerSet(W), report=report,
                        sinrs=sinrs, sum_rate=sum_rate(sinrs), info=info)


def _clip_power(W: np.ndarray, p_t: float) -> np.ndarray:
    power = float(np.sum(np.abs(W) ** 2))
    return W * math.sqrt(p_t / power) if power > p_t else W


def design_sdr(system: IsacSystem, seed=0) -> DesignResult:
    """Solve the relaxation, then accept rank-one blocks or run the extraction."""
    cons = system.constraints
    prob = build_sdr_problem(system)
    try:
        sol = solve_conic(prob, tol=system.tol, max_iter=system.max_iter)
    except Infeasible as exc:
        raise Infeasible(str(exc), _diagnose(system, build_sdr_problem)) from exc

    R_list = [cons.p_t * 0.5 * (R.value + R.value.conj().T) for R in prob.variables["R"]]
    ratios = []
    for R in R_list:
        lam = np.linalg.eigvalsh(R)
        ratios.append(float(lam[-2] / lam[-1]) if len(lam) > 1 and lam[-1] > 0 else 0.0)
    relaxed_power = float(sum(np.trace(R).real for R in R_list))
    info = {
        "relaxed_t": sol.objective,
        "relaxed_crb_phi": _relaxed_crb(system, sol.objective),
        "rank_ratios": ratios,
        "solver_residual": sol.residual,
        "relaxed_power": relaxed_power,
    }

    if max(ratios) <= RANK_ONE_TOL:
        cols = []
        for R in R_list:
            lam, U = np.linalg.eigh(R)
            cols.append(math.sqrt(lam[-1]) * U[:, -1])
        W = _clip_power(np.column_stack(cols), cons.p_t)
        info["extracted"] = False
        if _feasible(system, W, cons.coverage):
            return _finish("sdr", system, W, info)
        log.info("dominant eigenvectors miss a constraint; falling back to extraction")

    bf, attempts = extract_rank_one(R_list, system, seed=seed, relaxed_power=relaxed_power)
    info["extracted"] = True
    info["attempts"] = attempts
    return _finish("sdr", system, bf.W, info)


def _relaxed_crb(system: IsacSystem, t_scaled: float) -> float:
    """Direction CRB implied by the relaxed epigraph value."""
    sp = system.sensing
    n_r = system.cfg.n_r
    t = t_scaled * _t_unit(system)
    return sp.sigma_s2 / (2 * sp.g**2 * n_r * sp.t_s * t) if t > 0 else math.inf


def zf_components(H: np.ndarray) -> ZfComponents:
    """Pseudoinverse columns and the projector onto the null space of ``H``."""
    n_c, n_t = H.shape
    s = np.linalg.svd(H, compute_uv=False)
    if n_c > n_t or s[-1] <= s[0] * 1e-10:
        raise RankDeficient(f"channel rank below {n_c} (singular values {s[-1]:.3e}/{s[0]:.3e})")
    pinv = H.conj().T @ np.linalg.inv(H @ H.conj().T)
    P = np.eye(n_t) - pinv @ H
    return ZfComponents(H_pinv=pinv, P_perp=0.5 * (P + P.conj().T))


def _zf_bases(system: IsacSystem, zf: ZfComponents, direction_set) -> list:
    """Per-user 2-column bases in normalized units (SINR equals the first coefficient squared)."""
    cons = system.constraints
    # pinv of the scaled channel: columns shrink by sqrt(sigma_n^2 / P_t)
    hp = zf.H_pinv * math.sqrt(cons.sigma_n2 / cons.p_t)
    return [np.column_stack([hp[:, n], zf.P_perp @ system.bundles[k].a]) for n, k in enumerate(direction_set)]


def _coef(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Coefficients of Re(u^H M v) in the real coordinates (m11, m22, Re m12, Im m12)."""
    p11 = np.conj(u[0]) * v[0]
    p22 = np.conj(u[1]) * v[1]
    p12 = np.conj(u[0]) * v[1]
    p21 = np.conj(u[1]) * v[0]
    return np.stack([p11.real, p22.real, (p12 + p21).real, -(p12 - p21).imag], axis=-1)


def _zf_coefficients(system: IsacSystem, bases) -> dict:
    A_mat, Ad_mat = _pattern_matrices(system)
    rows = {"A": [], "D": [], "C": []}
    power = []
    for B in bases:
        ua, ud = B.conj().T @ A_mat, B.conj().T @ Ad_mat
        rows["A"].append(_coef(ua, ua))
        rows["D"].append(_coef(ud, ud))
        rows["C"].append(_coef(ud, ua))
        G = B.conj().T @ B
        power.append([G[0, 0].real, G[1, 1].real, 2 * G[1, 0].real, -2 * G[1, 0].imag])
    out = {key: np.concatenate(val, axis=1) for key, val in rows.items()}
    out["power"] = np.concatenate(power)
    return out


def build_zf_problem(system: IsacSystem, zf: ZfComponents, direction_set, coverage=None) -> ConicProblem:
    """Null-space steering problem with each user's coefficient pair lifted to a 2x2 PSD block.

    Each block ``M_n`` is held in real coordinates ``(m11, m22, Re m12, Im m12)``;
    positive semidefiniteness of a 2x2 Hermitian matrix is the second-order cone
    ``m11 + m22 >= ||(m11 - m22, 2 Re m12, 2 Im m12)||``. The basis-dependent
    coefficients are cvxpy parameters, so one compiled problem serves every
    direction set (see :func:`set_direction_set`).
    """
    cons = system.constraints
    coverage = cons.coverage if coverage is None else coverage
    n_c, K = system.n_users, system.partition.K
    x = cp.Variable((n_c, 4), name="M")
    t = cp.Variable(name="t")
    par = {
        "A": cp.Parameter((K, 4 * n_c), name="Phi_A"),
        "D": cp.Parameter((K, 4 * n_c), name="Phi_D"),
        "C": cp.Parameter((K, 4 * n_c), name="Phi_C"),
        "power": cp.Parameter(4 * n_c, name="power"),
    }
    xv = cp.vec(x.T, order="F")  # user-major (m11, m22, re, im) blocks
    A, D, C = par["A"] @ xv, par["D"] @ xv, par["C"] @ xv

    prob = ConicProblem(objective=t, variables={"M": x, "t": t}, meta={"kind": "zf", "params": par})
    prob.add("psd", [cp.SOC(x[n, 0] + x[n, 1], cp.hstack([x[n, 0] - x[n, 1], 2 * x[n, 2], 2 * x[n, 3]]))
                     for n in range(n_c)])
    prob.add("power", [par["power"] @ xv <= 1.0 - POWER_MARGIN])
    prob.add("sinr", [x[:, 0] >= cons.gamma * (1 + SINR_MARGIN)])
    _sensing_constraints(prob, A, D, C, t, system, coverage)
    set_direction_set(prob, system, zf, direction_set)
    return prob


def set_direction_set(prob: ConicProblem, system: IsacSystem, zf: ZfComponents, direction_set) -> None:
    if len(direction_set) != system.n_users:
        raise ValueError("direction set needs one subsection index per user")
    coefs = _zf_coefficients(system, _zf_bases(system, zf, direction_set))
    for key, param in prob.meta["params"].items():
        param.value = coefs[key]
    prob.meta["direction_set"] = tuple(int(k) for k in direction_set)


def _zf_blocks(x: np.ndarray) -> list:
    return [np.array([[r[0], r[2] + 1j * r[3]], [r[2] - 1j * r[3], r[1]]]) for r in x]


def _zf_recover(system: IsacSystem, bases, M_values) -> np.ndarray:
    """Rank-one coefficients from each lifted block, keeping the SINR coefficient exact."""
    p_t = system.constraints.p_t
    comm, sense = [], []
    for B, Mv in zip(bases, M_values):
        Mv = 0.5 * (Mv + Mv.conj().T)
        lam, U = np.linalg.eigh(Mv)
        e = U[:, -1]
        p = max(Mv[0, 0].real, 0.0)
        if abs(e[0]) < 1e-12:
            v = np.array([math.sqrt(p), 0.0])
        else:
            v = e * (math.sqrt(p) / abs(e[0])) * (abs(e[0]) / e[0])
        comm.append(v[0] * B[:, 0])
        sense.append(v[1] * B[:, 1])
    comm = np.column_stack(comm) * math.sqrt(p_t)
    sense = np.column_stack(sense) * math.sqrt(p_t)
    # communication and null-space parts are orthogonal, so power splits exactly
    p_comm = float(np.sum(np.abs(comm) ** 2))
    p_sense = float(np.sum(np.abs(sense) ** 2))
    if p_comm + p_sense > p_t and p_sense > 0:
        sense = sense * math.sqrt(max(p_t - p_comm, 0.0) / p_sense)
    return comm + sense


def _solve_zf_set(system: IsacSystem, zf: ZfComponents, prob: ConicProblem, ks):
    set_direction_set(prob, system, zf, ks)
    sol = solve_conic(prob, tol=system.tol, max_iter=system.max_iter)
    bases = _zf_bases(system, zf, ks)
    W = _zf_recover(system, bases, _zf_blocks(prob.variables["M"].value))
    report = crb_et(system.partition, system.bundles, covariance(W), system.sensing)
    return W, report, sol


def design_zf(system: IsacSystem, direction_sets=None) -> DesignResult:
    """Enumerate subsection assignments, solve each lifted problem, keep the lowest CRB."""
    zf = zf_components(system.channel.H)
    K, n_c = system.partition.K, system.n_users
    if direction_sets is None:
        if math.comb(K, n_c) > MAX_DIRECTION_SETS:
            raise ValueError(f"C({K}, {n_c}) direction sets exceed the enumeration guard")
        direction_sets = itertools.combinations(range(K), n_c)
    direction_sets = list(direction_sets)
    if not direction_sets:
        raise AllInfeasible("no direction sets to try", constraint_class="sinr")
    prob = build_zf_problem(system, zf, direction_sets[0])
    best = None
    feasible = 0
    for ks in direction_sets:
        try:
            W, report, sol = _solve_zf_set(system, zf, prob, ks)
        except (Infeasible, SolverFailure, IsacError) as exc:
            log.debug("direction set %s rejected: %s", ks, exc)
            continue
        if not _feasible(system, W, system.constraints.coverage):
            continue
        feasible += 1
        if best is None or report.crb_phi < best[1].crb_phi:
            best = (W, report, sol, ks)
    if best is None:
        # the interference-free SINR targets alone cost Gamma sigma^2 sum ||h_n^+||^2
        cons = system.constraints
        p_comm = cons.gamma * cons.sigma_n2 * float(np.sum(np.abs(zf.H_pinv) ** 2))
        cls = "sinr" if p_comm > cons.p_t else ("coverage" if cons.coverage else "unknown")
        raise AllInfeasible(f"none of {len(direction_sets)} direction sets admits a feasible ZF design",
                            constraint_class=cls)
    W, report, sol, ks = best
    info = {"direction_set": [int(k) for k in ks], "sets_tried": len(direction_sets),
            "sets_feasible": feasible, "relaxed_t": sol.objective}
    return _finish("zf", system, W, info)



def design_isotropic(system: IsacSystem) -> DesignResult:
    """Full power split over the first ``N_c`` antenna ports.

    Every steering vector sees ``a^H R_x a = P_t``, so the pattern is flat at
    the same level as ``R_x = (P_t / N_t) I``. SINRs are reported, not enforced.
    """
    n_t, n_c = system.cfg.n_t, system.n_users
    W = math.sqrt(system.constraints.p_t / n_c) * np.eye(n_t, n_c, dtype=complex)
    return _finish("isotropic", system, W, {})
