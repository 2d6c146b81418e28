"""Truncated-Fourier-series target contours and their line-of-sight partition.

A contour is described in a local frame whose +x axis is the target heading:

    rho(u) = [sum_q a_q cos(q u), sum_q b_q sin(q u)]

and placed in the global frame by ``p(u) = p_o + V(varphi) rho(u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import EmptyLoS

__all__ = [
    "TfsContour",
    "TargetPose",
    "SubsectionGeometry",
    "ContourPartition",
    "PRESETS",
    "preset",
    "rotation",
    "contour_point",
    "contour_tangent",
    "global_point",
    "contour_intermediate",
    "visibility",
    "los_interval",
    "partition_los",
]

_VISIBILITY_GRID = 4096


@dataclass(frozen=True)
class TfsContour:
    """Cosine coefficients ``m`` (x) and sine coefficients ``n`` (y), in meters."""

    m: tuple
    n: tuple

    def __post_init__(self):
        m = tuple(float(v) for v in self.m)
        n = tuple(float(v) for v in self.n)
        if len(m) != len(n):
            raise ValueError(f"m and n must have equal length, got {len(m)} and {len(n)}")
        if not m:
            raise ValueError("contour needs at least one harmonic")
        if not (m[0] > 0 and n[0] > 0):
            raise ValueError("first-harmonic coefficients a_1 and b_1 must be positive")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @property
    def Q(self) -> int:
        return len(self.m)

    @property
    def m_vec(self) -> np.ndarray:
        return np.asarray(self.m)

    @property
    def n_vec(self) -> np.ndarray:
        return np.asarray(self.n)

    def harmonics(self, u):
        """Cosine and sine harmonic vectors, each shaped ``(Q,) + shape(u)``."""
        q = np.arange(1, self.Q + 1).reshape((-1,) + (1,) * np.ndim(u))
        qu = q * np.asarray(u, dtype=float)
        return np.cos(qu), np.sin(qu)


@dataclass(frozen=True)
class TargetPose:
    d_o: float
    phi_o: float
    varphi: float = 0.0

    def __post_init__(self):
        if not self.d_o > 0:
            raise ValueError(f"d_o must be positive, got {self.d_o}")

    @property
    def p_o(self) -> np.ndarray:
        return self.d_o * np.array([math.cos(self.phi_o), math.sin(self.phi_o)])

    @property
    def V(self) -> np.ndarray:
        return rotation(self.varphi)


# Coefficients of the vehicle and UAV shapes used in the numerical study.
PRESETS = {
    "vehicle": TfsContour(
        m=(2.05, -0.002, 0.5, 0.0, 0.056, 0.001, -0.125, 0.003),
        n=(1.24, -0.001, 0.335, -0.001, 0.124, -0.001, 0.018, 0.0),
    ),
    "uav": TfsContour(
        m=(0.797, 0.0, -0.153, 0.0, -0.272, 0.0, -0.12, 0.0, 0.045),
        n=(0.797, 0.0, 0.153, 0.0, -0.272, 0.0, 0.12, 0.0, 0.045),
    ),
}


def preset(name: str) -> TfsContour:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown contour preset {name!r}; known: {sorted(PRESETS)}") from None


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def contour_point(c: TfsContour, u):
    """Local contour point; ``u`` may be a scalar or an array (result ``(2,) + shape``)."""
    nu, sg = c.harmonics(u)
    x = np.tensordot(c.m_vec, nu, axes=1)
    y = np.tensordot(c.n_vec, sg, axes=1)
    return np.stack([x, y])


def contour_tangent(c: TfsContour, u):
    """Analytic derivative d rho / du."""
    nu, sg = c.harmonics(u)
    q = np.arange(1, c.Q + 1, dtype=float)
    dx = -np.tensordot(c.m_vec * q, sg, axes=1)
    dy = np.tensordot(c.n_vec * q, nu, axes=1)
    return np.stack([dx, dy])


def global_point(c: TfsContour, pose: TargetPose, u):
    rho = contour_point(c, u)
    p = pose.V @ rho.reshape(2, -1) + pose.p_o[:, None]
    return p.reshape(rho.shape)


def contour_intermediate(c: TfsContour, pose: TargetPose, u_k: float, convention: str = "printed") -> float:
    """Contour intermediate scalar X_k entering the range/orientation bounds.

    ``"printed"`` evaluates ``-nu^T m cos(phi_o + varphi) + sigma^T n sin(phi_o + varphi)``.
    ``"geometric"`` evaluates the cross-range offset ``rho_k^T V^T p_perp / d_o``, i.e.
    ``-nu^T m sin(phi_o - varphi) + sigma^T n cos(phi_o - varphi)``, which is what the
    derivative of the subsection range with respect to the target direction gives.
    """
    nu, sg = c.harmonics(u_k)
    x = float(c.m_vec @ nu)
    y = float(c.n_vec @ sg)
    if convention == "printed":
        ang = pose.phi_o + pose.varphi
        return -x * math.cos(ang) + y * math.sin(ang)
    if convention == "geometric":
        ang = pose.phi_o - pose.varphi
        return -x * math.sin(ang) + y * math.cos(ang)
    raise ValueError(f"unknown X convention {convention!r}")


def visibility(c: TfsContour, pose: TargetPose, u, bs_position=(0.0, 0.0)):
    """Inner product of the outward normal with the direction to the BS.

    Positive values mark elements facing the BS. For an anti-clockwise contour
    the outward normal is the tangent rotated by -90 degrees.
    """
    u = np.asarray(u, dtype=float)
    p = global_point(c, pose, u).reshape(2, -1)
    t = pose.V @ contour_tangent(c, u).reshape(2, -1)
    normal = np.stack([t[1], -t[0]])
    to_bs = np.asarray(bs_position, dtype=float)[:, None] - p
    out = np.sum(normal * to_bs, axis=0)
    return out.reshape(u.shape) if u.ndim else float(out[0])


def los_interval(c: TfsContour, pose: TargetPose, bs_position=(0.0, 0.0), grid: int = _VISIBILITY_GRID):
    """Largest contiguous local-direction interval visible from the BS.

    Returns ``(u_lower, u_upper)`` with ``u_lower`` in ``[0, 2 pi)`` and
    ``u_upper > u_lower`` (possibly beyond ``2 pi`` when the run wraps).
    """
    step = 2 * math.pi / grid
    us = np.arange(grid) * step
    vis = visibility(c, pose, us, bs_position) > 0
    if not vis.any():
        raise EmptyLoS("no contour element has line of sight to the base station")
    if vis.all():
        return 0.0, 2 * math.pi

    # Rotate so index 0 is invisible; runs then never wrap in index space.
    shift = int(np.argmin(vis))
    rolled = np.roll(vis, -shift)
    best_len, best_start, run_start = 0, 0, None
    for i, v in enumerate(np.append(rolled, False)):
        if v and run_start is None:
            run_start = i
        elif not v and run_start is not None:
            if i - run_start > best_len:
                best_len, best_start = i - run_start, run_start
            run_start = None
    first = best_start + shift
    last = first + best_len - 1

    def f(u):
        return visibility(c, pose, u, bs_position)

    u_lo = brentq(f, (first - 1) * step, first * step, xtol=1e-14)
    u_hi = brentq(f, last * step, (last + 1) * step, xtol=1e-14)
    offset = math.floor(u_lo / (2 * math.pi)) * 2 * math.pi
    return u_lo - offset, u_hi - offset


@dataclass(frozen=True)
class SubsectionGeometry:
    u_k: float
    rho_k: np.ndarray
    p_k: np.ndarray
    d_k: float
    phi_k: float
    l_k: float
    X_k: float
    nu_k: np.ndarray
    sigma_k: np.ndarray


@dataclass(frozen=True)
class ContourPartition:
    subsections: tuple
    u_lower: float
    u_upper: float
    contour: TfsContour
    pose: TargetPose
    bs_position: tuple = (0.0, 0.0)
    normalized: bool = False
    x_convention: str = "printed"
    raw_lengths: np.ndarray = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return len(self.subsections)

    @property
    def u(self) -> np.ndarray:
        return np.array([s.u_k for s in self.subsections])

    @property
    def phi(self) -> np.ndarray:
        return np.array([s.phi_k for s in self.subsections])

    @property
    def d(self) -> np.ndarray:
        return np.array([s.d_k for s in self.subsections])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.l_k for s in self.subsections])

    @property
    def X(self) -> np.ndarray:
        return np.array([s.X_k for s in self.subsections])

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(self.u_lower, self.u_upper, self.K + 1)


def _contains(c: TfsContour, pose: TargetPose, point, samples: int = 2048) -> bool:
    """Even-odd ray-casting test against a densely sampled contour polygon."""
    xs, ys = global_point(c, pose, np.linspace(0.0, 2 * math.pi, samples, endpoint=False))
    px, py = point
    x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
    crosses = (ys > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = xs + (py - ys) * (x2 - xs) / (y2 - ys)
    return bool(np.count_nonzero(crosses & (px < x_at)) % 2)


def _arc_length(c: TfsContour, lo: float, hi: float) -> float:
    def speed(u):
        return float(np.hypot(*contour_tangent(c, u)))

    value, _ = quad(speed, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(value)


def subsection_geometry(c: TfsContour, pose: TargetPose, u_k: float, l_k: float,
                        bs_position=(0.0, 0.0), x_convention: str = "printed") -> SubsectionGeometry:
    rho = contour_point(c, u_k)
    p = pose.p_o + pose.V @ rho
    rel = p - np.asarray(bs_position, dtype=float)
    nu, sg = c.harmonics(u_k)
    return SubsectionGeometry(
        u_k=float(u_k),
        rho_k=rho,
        p_k=p,
        d_k=float(np.hypot(rel[0], rel[1])),
        phi_k=float(math.atan2(rel[1], rel[0])),
        l_k=float(l_k),
        X_k=contour_intermediate(c, pose, u_k, x_convention),
        nu_k=nu,
        sigma_k=sg,
    )


def partition_los(c: TfsContour, pose: TargetPose, bs_position=(0.0, 0.0), K: int = 8,
                  normalize: bool = False, x_convention: str = "printed") -> ContourPartition:
    """Split the visible contour into ``K`` equal-angle bins.

    Representative points sit at bin midpoints; bin lengths are adaptive
    quadratures of the contour speed. With ``normalize`` the lengths are
    rescaled to sum to one.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    bs = tuple(float(v) for v in bs_position)
    if _contains(c, pose, bs):
        raise EmptyLoS("base station lies inside the target contour")
    u_lo, u_hi = los_interval(c, pose, bs)
    edges = np.linspace(u_lo, u_hi, K + 1)
    raw = np.array([_arc_length(c, edges[k], edges[k + 1]) for k in range(K)])
    lengths = raw / raw.sum() if normalize else raw
    mids = 0.5 * (edges[:-1] + edges[1:])
    subs = tuple(
        subsection_geometry(c, pose, mids[k], lengths[k], bs, x_convention) for k in range(K)
    )
    return ContourPartition(
        subsections=subs,
        u_lower=float(u_lo),
        u_upper=float(u_hi),
        contour=c,
        pose=pose,
        bs_position=bs,
        normalized=normalize,
        x_convention=x_convention,
        raw_lengths=raw,
    )
