"""Cramér-Rao bounds on target range, direction and orientation.

Two independent routes are provided:

* :func:`crb_et` / :func:`crb_pt` evaluate the closed-form bounds directly from
  per-subsection beampattern sums.
* :func:`fim_numeric_oracle` assembles the Fisher blocks from the raw steering
  vectors and the Jacobian of ``(d_k, phi_k)`` with respect to
  ``(d_o, phi_o, varphi)``; :func:`efim_schur` then eliminates the path-loss
  nuisance and inverts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import speed_of_light

from .array import ArrayConfig, SteeringBundle, bundle, check_psd
from .contour import ContourPartition, TargetPose, global_point
from .errors import DegenerateFim, SingularEfim, ZeroIllumination

log = logging.getLogger(__name__)

__all__ = [
    "SensingParams",
    "FimBlocks",
    "CrbReport",
    "bundles_for",
    "subsection_terms",
    "crb_et",
    "crb_direction",
    "crb_pt",
    "fim_numeric_oracle",
    "efim_schur",
    "subsection_jacobian",
]

COND_LIMIT = 1e12
DEGENERACY_TOL = 1e-12
CROSS_CHECK_RTOL = 1e-8


@dataclass(frozen=True)
class SensingParams:
    g: float
    sigma_s2: float
    t_s: float = 1.0
    bandwidth: float = 100e6
    c0: float = speed_of_light

    def __post_init__(self):
        if not (self.g > 0 and self.sigma_s2 > 0 and self.t_s > 0 and self.bandwidth > 0):
            raise ValueError("sensing parameters must be positive")

    @classmethod
    def at_distance(cls, d_o: float, sigma_s2: float, **kw) -> "SensingParams":
        return cls(g=1.0 / d_o**2, sigma_s2=sigma_s2, **kw)

    @property
    def Z2(self) -> float:
        """(4 pi B / c0)^2 per unit observation time."""
        return (4 * math.pi * self.bandwidth / self.c0) ** 2

    @property
    def Z2_eff(self) -> float:
        # delay-derivative energy integrates over t_s like every other block
        return self.Z2 * self.t_s


@dataclass
class FimBlocks:
    F_kappa1: np.ndarray
    f_g: float
    f_kappa1_g: np.ndarray

    @property
    def J_kappa1(self) -> np.ndarray:
        return self.F_kappa1 - np.outer(self.f_kappa1_g, self.f_kappa1_g) / self.f_g

    def to_dict(self) -> dict:
        return {
            "F_kappa1": self.F_kappa1.tolist(),
            "f_g": float(self.f_g),
            "f_kappa1_g": self.f_kappa1_g.tolist(),
            "J_kappa1": self.J_kappa1.tolist(),
        }


@dataclass
class CrbReport:
    crb_d: float
    crb_phi: float
    crb_varphi: float
    blocks: FimBlocks
    per_subsection: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "crb_d": self.crb_d,
            "crb_phi": self.crb_phi,
            "crb_varphi": self.crb_varphi,
            "blocks": self.blocks.to_dict(),
            "per_subsection": {k: np.asarray(v).tolist() for k, v in self.per_subsection.items()},
        }


def bundles_for(partition: ContourPartition, cfg: ArrayConfig) -> list:
    return [bundle(cfg, s.phi_k) for s in partition.subsections]


def subsection_terms(bundles, R_x: np.ndarray) -> dict:
    """Beampattern quantities per subsection.

    ``A`` = a^H R a, ``D`` = a_dot^H R a_dot, ``C`` = Re(a_dot^H R a).
    """
    A = np.array([np.vdot(b.a, R_x @ b.a).real for b in bundles])
    D = np.array([np.vdot(b.a_dot, R_x @ b.a_dot).real for b in bundles])
    C = np.array([np.vdot(b.a_dot, R_x @ b.a).real for b in bundles])
    Z1 = np.array([b.Z1 for b in bundles])
    return {"A": A, "D": D, "C": C, "Z1": Z1}


def _illumination_floor(R_x: np.ndarray, n_t: int) -> float:
    return DEGENERACY_TOL * abs(np.trace(R_x).real) * n_t


def _direction_terms(partition, bundles, R_x, sp):
    check_psd(R_x)
    terms = subsection_terms(bundles, R_x)
    A, D, C, Z1 = terms["A"], terms["D"], terms["C"], terms["Z1"]
    if np.any(A <= _illumination_floor(R_x, len(bundles[0].a))):
        raise ZeroIllumination(f"subsection beampattern {A.min():.3e} is not positive")
    l = partition.lengths
    n_r = len(bundles[0].b)
    S0 = np.sum(l * A)
    G = np.sum(l * (Z1 * A + D))
    Cs = np.sum(l * C)
    info_phi = G - Cs**2 / S0
    if info_phi <= DEGENERACY_TOL * G:
        raise DegenerateFim("direction information vanishes after nuisance elimination")
    crb_phi = sp.sigma_s2 / (2 * sp.g**2 * n_r * sp.t_s * info_phi)
    return terms, S0, G, Cs, crb_phi


def crb_direction(partition: ContourPartition, bundles, R_x: np.ndarray, sp: SensingParams) -> float:
    """Direction bound alone; defined even when range and orientation are not identifiable."""
    return float(_direction_terms(partition, bundles, R_x, sp)[-1])


def crb_et(partition: ContourPartition, bundles, R_x: np.ndarray, sp: SensingParams) -> CrbReport:
    """Closed-form extended-target CRBs on ``(d_o, phi_o, varphi)``."""
    terms, S0, G, Cs, crb_phi = _direction_terms(partition, bundles, R_x, sp)
    A, D, C, Z1 = terms["A"], terms["D"], terms["C"], terms["Z1"]
    l = partition.lengths
    X = partition.X
    n_r = len(bundles[0].b)
    S1 = np.sum(l * X * A)
    S2 = np.sum(l * X**2 * A)
    pref_d = 2 * sp.g**2 * n_r * sp.Z2_eff / sp.sigma_s2

    if S2 <= 0:
        raise DegenerateFim("all contour intermediates are zero")
    info_d = S0 - S1**2 / S2
    info_or = S2 - S1**2 / S0
    if info_d <= DEGENERACY_TOL * S0 or info_or <= DEGENERACY_TOL * S2:
        raise DegenerateFim("contour intermediates are all equal; range/orientation unidentifiable")
    crb_d = 1.0 / (pref_d * info_d)
    crb_varphi = crb_phi + 1.0 / (pref_d * info_or)

    blocks = _closed_form_blocks(sp, n_r, S0, S1, S2, G, Cs)
    report = CrbReport(
        crb_d=float(crb_d),
        crb_phi=float(crb_phi),
        crb_varphi=float(crb_varphi),
        blocks=blocks,
        per_subsection={
            "beampattern": A,
            "deriv_energy": D,
            "cross_real": C,
            "X": X,
            "Z1": Z1,
            "l": l,
            "phi": partition.phi,
        },
    )
    _cross_check(report)
    return report


def _closed_form_blocks(sp, n_r, S0, S1, S2, G, Cs) -> FimBlocks:
    c = 2 * sp.g**2 * n_r / sp.sigma_s2
    z = sp.Z2_eff
    F = c * np.array([
        [z * S0, z * S1, z * S1],
        [z * S1, z * S2 + sp.t_s * G, z * S2],
        [z * S1, z * S2, z * S2],
    ])
    f_g = 2 * n_r * sp.t_s / sp.sigma_s2 * S0
    f_kg = np.array([0.0, 2 * sp.g * n_r * sp.t_s / sp.sigma_s2 * Cs, 0.0])
    return FimBlocks(F_kappa1=F, f_g=float(f_g), f_kappa1_g=f_kg)


def _cross_check(report: CrbReport) -> None:
    try:
        diag = np.diag(efim_schur(report.blocks))
    except SingularEfim:
        log.debug("EFIM too ill-conditioned for the inversion cross-check")
        return
    closed = np.array([report.crb_d, report.crb_phi, report.crb_varphi])
    gap = np.max(np.abs(diag - closed) / closed)
    if gap > CROSS_CHECK_RTOL:
        log.warning("closed-form CRB differs from EFIM inversion by %.2e (relative)", gap)


def crb_pt(phi_o: float, bnd: SteeringBundle, R_x: np.ndarray, sp: SensingParams):
    """Point-target bounds ``(crb_d, crb_phi)``."""
    check_psd(R_x)
    A = np.vdot(bnd.a, R_x @ bnd.a).real
    if A <= _illumination_floor(R_x, len(bnd.a)):
        raise ZeroIllumination("point target is not illuminated")
    D = np.vdot(bnd.a_dot, R_x @ bnd.a_dot).real
    C = np.vdot(bnd.a_dot, R_x @ bnd.a).real
    n_r = len(bnd.b)
    crb_d = sp.sigma_s2 / (2 * sp.g**2 * n_r * sp.Z2_eff * A)
    info = bnd.Z1 * A + D - C**2 / A
    if info <= DEGENERACY_TOL * (bnd.Z1 * A + D):
        raise DegenerateFim("point-target direction information vanishes")
    crb_phi = sp.sigma_s2 / (2 * sp.g**2 * n_r * sp.t_s * info)
    return float(crb_d), float(crb_phi)


def _subsection_position(pose: TargetPose, partition: ContourPartition, u: float, kappa1):
    d_o, phi_o, varphi = kappa1
    moved = TargetPose(d_o=d_o, phi_o=phi_o, varphi=varphi)
    p = global_point(partition.contour, moved, u) - np.asarray(partition.bs_position)
    return np.array([math.hypot(p[0], p[1]), math.atan2(p[1], p[0])])


def subsection_jacobian(partition: ContourPartition, k: int, mode: str = "approximate",
                        step: float = 1e-6) -> np.ndarray:
    """2x3 Jacobian of ``(d_k, phi_k)`` with respect to ``(d_o, phi_o, varphi)``.

    ``"approximate"`` uses the far-field forms ``[1, X_k, X_k]`` and
    ``[0, 1, 0]``; ``"exact"`` differentiates the subsection position
    numerically (central differences, relative step on ``d_o``).
    """
    if mode == "approximate":
        X = partition.subsections[k].X_k
        return np.array([[1.0, X, X], [0.0, 1.0, 0.0]])
    if mode != "exact":
        raise ValueError(f"unknown Jacobian mode {mode!r}")
    pose = partition.pose
    u = partition.subsections[k].u_k
    base = np.array([pose.d_o, pose.phi_o, pose.varphi])
    steps = np.array([step * pose.d_o, step, step])
    J = np.empty((2, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = steps[i]
        fwd = _subsection_position(pose, partition, u, base + e)
        bwd = _subsection_position(pose, partition, u, base - e)
        J[:, i] = (fwd - bwd) / (2 * steps[i])
    return J


def fim_numeric_oracle(partition: ContourPartition, bundles, R_x: np.ndarray, sp: SensingParams,
                       mode: str = "approximate") -> FimBlocks:
    """Assemble Fisher blocks from raw steering vectors and the subsection Jacobian.

    Uses vector inner products in place of the closed-form array identities, so
    the result is an independent check of :func:`crb_et`.
    """
    check_psd(R_x)
    ts = sp.t_s
    delay = (2.0 / sp.c0) ** 2 * (2 * math.pi * sp.bandwidth) ** 2 * ts
    F = np.zeros((3, 3))
    f_g = 0.0
    f_kg = np.zeros(3)
    for k, (sub, bnd) in enumerate(zip(partition.subsections, bundles)):
        a, ad, b, bd = bnd.a, bnd.a_dot, bnd.b, bnd.b_dot
        Ra, Rad = R_x @ a, R_x @ ad
        A = np.vdot(a, Ra).real
        if A <= _illumination_floor(R_x, len(a)):
            raise ZeroIllumination(f"subsection {k} is not illuminated")
        nb2 = np.vdot(b, b).real
        nbd2 = np.vdot(bd, bd).real
        bd_b = np.vdot(bd, b)
        ad_R_a = np.vdot(ad, Ra)
        # per-subsection information on (d_k, phi_k)
        info = np.array([
            [nb2 * delay * A, 0.0],
            [0.0, ts * (nbd2 * A + nb2 * np.vdot(ad, Rad).real + 2 * (bd_b * ad_R_a).real)],
        ])
        # Re of the integral of (dq/dTheta)^H q
        score = np.array([0.0, ts * (bd_b * A + nb2 * np.vdot(a, Rad)).real])
        J = subsection_jacobian(partition, k, mode)
        F += sub.l_k * J.T @ info @ J
        f_kg += sub.l_k * J.T @ score
        f_g += sub.l_k * nb2 * ts * A
    return FimBlocks(
        F_kappa1=2 * sp.g**2 / sp.sigma_s2 * F,
        f_g=float(2 / sp.sigma_s2 * f_g),
        f_kappa1_g=2 * sp.g / sp.sigma_s2 * f_kg,
    )


def efim_schur(blocks: FimBlocks) -> np.ndarray:
    """Inverse of the path-loss-reduced EFIM; the diagonal is ``(crb_d, crb_phi, crb_varphi)``."""
    if not blocks.f_g > 0:
        raise SingularEfim("path-loss information f_g must be positive")
    J = blocks.J_kappa1
    J = 0.5 * (J + J.T)
    scale = np.sqrt(np.abs(np.diag(J)))
    if np.any(scale == 0):
        raise SingularEfim("EFIM has a zero diagonal entry", eigenvalue=0.0)
    Jn = J / np.outer(scale, scale)
    lam = np.linalg.eigvalsh(Jn)
    if lam[0] <= lam[-1] / COND_LIMIT:
        raise SingularEfim(f"EFIM is singular (scaled eigenvalue {lam[0]:.3e})", eigenvalue=float(lam[0]))
    return np.linalg.inv(Jn) / np.outer(scale, scale)
