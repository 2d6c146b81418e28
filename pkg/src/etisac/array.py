"""Uniform linear arrays, multipath user channels, SINR and beampatterns."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPSD

__all__ = [
    "ArrayConfig",
    "SteeringBundle",
    "CommChannel",
    "steering",
    "steering_tx",
    "steering_rx",
    "steering_derivative",
    "z1",
    "bundle",
    "gen_channel",
    "sinr",
    "sinr_all",
    "sum_rate",
    "covariance",
    "check_psd",
    "beampattern",
    "db2lin",
    "dbm2watt",
    "dbw2watt",
]

PSD_TOL = 1e-9


def db2lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbw2watt(dbw):
    return db2lin(dbw)


def dbm2watt(dbm):
    return db2lin(np.asarray(dbm, dtype=float) - 30.0)


@dataclass(frozen=True)
class ArrayConfig:
    n_t: int = 16
    n_r: int = 16
    spacing: float = 0.5

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ValueError("antenna counts must be positive")

    def size(self, side: str) -> int:
        if side == "tx":
            return self.n_t
        if side == "rx":
            return self.n_r
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")


def _centered(n: int) -> np.ndarray:
    # (N-1)/2, ..., -(N-1)/2
    return (n - 1) / 2.0 - np.arange(n)


def steering(n: int, phi, spacing: float = 0.5) -> np.ndarray:
    """Center-referenced ULA response; ``(n,)`` for scalar ``phi``, ``(n, len(phi))`` otherwise."""
    phase = 2 * math.pi * spacing * np.multiply.outer(_centered(n), np.sin(phi))
    return np.exp(1j * phase)


def steering_tx(cfg: ArrayConfig, phi) -> np.ndarray:
    return steering(cfg.n_t, phi, cfg.spacing)


def steering_rx(cfg: ArrayConfig, phi) -> np.ndarray:
    return steering(cfg.n_r, phi, cfg.spacing)


def steering_derivative(cfg: ArrayConfig, phi, side: str = "tx") -> np.ndarray:
    """d steering / d phi = j 2 pi spacing cos(phi) diag(centered) steering."""
    n = cfg.size(side)
    c = _centered(n)
    v = steering(n, phi, cfg.spacing)
    scale = 2j * math.pi * cfg.spacing * np.multiply.outer(c, np.cos(phi))
    return scale * v


def z1(n_r: int, phi, spacing: float = 0.5):
    """Squared norm of the receive-steering derivative divided by ``n_r``."""
    k = 2 * math.pi * spacing
    return k**2 * (n_r**2 - 1) * np.cos(phi) ** 2 / 12.0


@dataclass(frozen=True)
class SteeringBundle:
    phi: float
    a: np.ndarray
    a_dot: np.ndarray
    b: np.ndarray
    b_dot: np.ndarray
    Z1: float


def bundle(cfg: ArrayConfig, phi: float) -> SteeringBundle:
    phi = float(phi)
    return SteeringBundle(
        phi=phi,
        a=steering_tx(cfg, phi),
        a_dot=steering_derivative(cfg, phi, "tx"),
        b=steering_rx(cfg, phi),
        b_dot=steering_derivative(cfg, phi, "rx"),
        Z1=float(z1(cfg.n_r, phi, cfg.spacing)),
    )


@dataclass(frozen=True)
class CommChannel:
    """Downlink channel; row ``n`` of ``H`` is ``h_n^H``."""

    H: np.ndarray
    gains: np.ndarray
    path_dirs: np.ndarray
    path_gains: np.ndarray
    path_powers: np.ndarray

    @property
    def n_users(self) -> int:
        return self.H.shape[0]

    @property
    def h(self) -> np.ndarray:
        """Channel vectors ``h_n`` as columns."""
        return self.H.conj().T


def gen_channel(cfg: ArrayConfig, user_dirs, path_loss_db, L: int = 6, los_fraction=0.9,
                seed=None) -> CommChannel:
    """Saleh-Valenzuela style multipath channel.

    Path 1 leaves towards the user direction and carries ``los_fraction`` of the
    mean power; the remaining ``L - 1`` paths share the rest equally and leave in
    uniformly random directions. ``los_fraction=None`` models a blocked LoS: all
    ``L`` paths are random with equal power.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    user_dirs = np.atleast_1d(np.asarray(user_dirs, dtype=float))
    n_c = user_dirs.size
    loss = np.broadcast_to(np.asarray(path_loss_db, dtype=float), (n_c,))
    gains = db2lin(-loss)
    rng = np.random.default_rng(seed)

    if los_fraction is None:
        powers = np.full(L, 1.0 / L)
    elif L == 1:
        powers = np.ones(1)
    else:
        if not 0 < los_fraction <= 1:
            raise ValueError("los_fraction must lie in (0, 1]")
        powers = np.concatenate([[los_fraction], np.full(L - 1, (1 - los_fraction) / (L - 1))])

    dirs = rng.uniform(-math.pi / 2, math.pi / 2, size=(n_c, L))
    if los_fraction is not None:
        dirs[:, 0] = user_dirs
    beta = (rng.standard_normal((n_c, L)) + 1j * rng.standard_normal((n_c, L))) * np.sqrt(powers / 2)

    h = np.empty((cfg.n_t, n_c), dtype=complex)
    for n in range(n_c):
        h[:, n] = math.sqrt(gains[n]) * (steering_tx(cfg, dirs[n]) @ beta[n])
    return CommChannel(H=h.conj().T, gains=gains, path_dirs=dirs, path_gains=beta,
                       path_powers=np.tile(powers, (n_c, 1)))


def sinr_all(H: np.ndarray, W: np.ndarray, sigma_n2: float) -> np.ndarray:
    G = np.abs(H @ W) ** 2
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return signal / (interference + sigma_n2)


def sinr(channel: CommChannel, W: np.ndarray, n: int, sigma_n2: float) -> float:
    return float(sinr_all(channel.H, W, sigma_n2)[n])


def sum_rate(sinrs) -> float:
    return float(np.sum(np.log2(1.0 + np.asarray(sinrs))))


def covariance(W: np.ndarray) -> np.ndarray:
    return W @ W.conj().T


def check_psd(R: np.ndarray, tol: float = PSD_TOL) -> None:
    if not np.allclose(R, R.conj().T, atol=tol * max(1.0, abs(np.trace(R)))):
        raise NotPSD("matrix is not Hermitian")
    lam = np.linalg.eigvalsh(R)
    floor = -tol * max(abs(np.trace(R).real), np.finfo(float).tiny)
    if lam[0] < floor:
        raise NotPSD(f"smallest eigenvalue {lam[0]:.3e} below {floor:.3e}")


def beampattern(R_x: np.ndarray, cfg: ArrayConfig, phi_grid) -> np.ndarray:
    """Transmit energy ``a(phi)^H R_x a(phi)`` over a grid of directions."""
    check_psd(R_x)
    A = steering_tx(cfg, np.atleast_1d(np.asarray(phi_grid, dtype=float)))
    return np.einsum("ig,ij,jg->g", A.conj(), R_x, A).real
