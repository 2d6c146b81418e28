"""Everything a design or simulation needs about one ISAC snapshot."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array import ArrayConfig, CommChannel, bundle
from .contour import ContourPartition
from .crb import SensingParams, bundles_for

__all__ = ["DesignConstraints", "IsacSystem"]


@dataclass(frozen=True)
class DesignConstraints:
    p_t: float
    gamma: float
    sigma_n2: float
    coverage: bool = True

    def __post_init__(self):
        if not (self.p_t > 0 and self.gamma > 0 and self.sigma_n2 > 0):
            raise ValueError("P_t, Gamma and sigma_n^2 must be positive")


@dataclass
class IsacSystem:
    cfg: ArrayConfig
    channel: CommChannel
    partition: ContourPartition
    constraints: DesignConstraints
    sensing: SensingParams
    tol: float = 1e-7
    max_iter: int = 200
    max_attempts: int = 100
    bundles: list = field(default=None)

    def __post_init__(self):
        if self.bundles is None:
            self.bundles = bundles_for(self.partition, self.cfg)
        n_c = self.channel.n_users
        if not n_c <= self.cfg.n_t <= self.cfg.n_r:
            raise ValueError(f"need N_c <= N_t <= N_r, got {n_c}, {self.cfg.n_t}, {self.cfg.n_r}")

    @property
    def n_users(self) -> int:
        return self.channel.n_users

    @property
    def target_bundle(self):
        return bundle(self.cfg, self.partition.pose.phi_o)

    @property
    def H_scaled(self) -> np.ndarray:
        """Channel rows scaled so unit noise and unit total power apply."""
        c = self.constraints
        return self.channel.H * np.sqrt(c.p_t / c.sigma_n2)
