"""Scenario files: a YAML document with unit-suffixed keys, mapped onto the library objects."""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .array import ArrayConfig, db2lin, dbm2watt, dbw2watt, gen_channel
from .contour import PRESETS, TargetPose, TfsContour, partition_los
from .crb import SensingParams
from .errors import ScenarioError
from .system import DesignConstraints, IsacSystem

__all__ = ["Scenario", "default_scenario", "load_scenario", "dump_scenario", "SWEEP_KEYS"]

# sweepable keys and the field each one writes
SWEEP_KEYS = {
    "d_o_m": "d_o_m",
    "gamma_db": "gamma_db",
    "n_c": "n_c",
    "bandwidth_hz": "bandwidth_hz",
    "k": "k",
}

_SECTIONS = {
    "array": ("n_t", "n_r", "spacing"),
    "users": ("dirs_deg", "path_loss_db", "paths", "los_fraction", "channel_seed"),
    "target": ("contour", "d_o_m", "phi_o_deg", "varphi_deg", "k", "normalize", "x_convention",
               "bs_position_m"),
    "sensing": ("sigma_s2_dbm", "bandwidth_hz", "t_s_s", "radar_snr_hold"),
    "constraints": ("p_t_dbw", "gamma_db", "sigma_n2_dbm", "coverage"),
    "solver": ("tol", "max_iter", "max_attempts"),
}


@dataclass
class Scenario:
    n_t: int = 16
    n_r: int = 16
    spacing: float = 0.5
    dirs_deg: list = field(default_factory=lambda: [-60.0, -35.0, 35.0, 60.0])
    path_loss_db: float = 100.0
    paths: int = 6
    los_fraction: float | None = 0.9
    channel_seed: int = 0
    contour: object = "vehicle"
    d_o_m: float = 27.0
    phi_o_deg: float = 0.0
    varphi_deg: float = 0.0
    k: int = 8
    normalize: bool = False
    x_convention: str = "printed"
    bs_position_m: list = field(default_factory=lambda: [0.0, 0.0])
    sigma_s2_dbm: float = -80.0
    bandwidth_hz: float = 100e6
    t_s_s: float = 1.0
    radar_snr_hold: bool = False
    p_t_dbw: float = 0.0
    gamma_db: float = 10.0
    sigma_n2_dbm: float = -80.0
    coverage: bool = True
    tol: float = 1e-7
    max_iter: int = 200
    max_attempts: int = 100
    # reference point for the radar-SNR hold; defaults to this scenario's own d_o and sigma_s^2
    hold_reference: dict | None = None

    # --- validation -----------------------------------------------------
    def validate(self) -> "Scenario":
        problems = []
        n_c = len(self.dirs_deg)
        if not (1 <= n_c <= self.n_t <= self.n_r):
            problems.append(f"need 1 <= N_c <= N_t <= N_r, got {n_c}, {self.n_t}, {self.n_r}")
        if self.spacing <= 0:
            problems.append("spacing must be positive")
        if self.paths < 1:
            problems.append("paths must be >= 1")
        if self.los_fraction is not None and not 0 < self.los_fraction <= 1:
            problems.append("los_fraction must lie in (0, 1] or be null")
        if self.d_o_m <= 0:
            problems.append("d_o_m must be positive")
        if self.k < 1:
            problems.append("k must be >= 1")
        if self.bandwidth_hz <= 0 or self.t_s_s <= 0:
            problems.append("bandwidth_hz and t_s_s must be positive")
        if self.x_convention not in ("printed", "geometric"):
            problems.append("x_convention must be 'printed' or 'geometric'")
        if len(self.bs_position_m) != 2:
            problems.append("bs_position_m needs two coordinates")
        for key in ("p_t_dbw", "gamma_db", "sigma_n2_dbm", "sigma_s2_dbm", "path_loss_db"):
            if not math.isfinite(float(getattr(self, key))):
                problems.append(f"{key} must be finite")
        try:
            self.tfs()
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"contour: {exc}")
        if problems:
            raise ScenarioError("; ".join(problems))
        return self

    # --- derived quantities ---------------------------------------------
    @property
    def n_c(self) -> int:
        return len(self.dirs_deg)

    @property
    def p_t(self) -> float:
        return float(dbw2watt(self.p_t_dbw))

    @property
    def gamma(self) -> float:
        return float(db2lin(self.gamma_db))

    @property
    def sigma_n2(self) -> float:
        return float(dbm2watt(self.sigma_n2_dbm))

    @property
    def radar_snr(self) -> float:
        """gamma_s = N_r P_t / (d_o^4 sigma_s^2) at the hold reference."""
        ref = self.hold_reference or {"d_o_m": self.d_o_m, "sigma_s2_dbm": self.sigma_s2_dbm}
        return self.n_r * self.p_t / (ref["d_o_m"] ** 4 * float(dbm2watt(ref["sigma_s2_dbm"])))

    @property
    def sigma_s2(self) -> float:
        if self.radar_snr_hold:
            return self.n_r * self.p_t / (self.d_o_m**4 * self.radar_snr)
        return float(dbm2watt(self.sigma_s2_dbm))

    def tfs(self) -> TfsContour:
        if isinstance(self.contour, str):
            if self.contour.lower() not in PRESETS:
                raise KeyError(f"unknown preset {self.contour!r}")
            return PRESETS[self.contour.lower()]
        if isinstance(self.contour, dict):
            return TfsContour(m=np.asarray(self.contour["m"], float), n=np.asarray(self.contour["n"], float))
        raise TypeError("contour must be a preset name or a mapping with 'm' and 'n'")

    def linear_values(self) -> dict:
        """Linear-unit values next to their raw inputs, for auditing unit conversions."""
        snr = self.p_t * float(db2lin(-self.path_loss_db)) / self.sigma_n2
        return {
            "p_t_w": self.p_t,
            "gamma": self.gamma,
            "sigma_n2_w": self.sigma_n2,
            "sigma_s2_w": self.sigma_s2,
            "radar_snr": self.radar_snr,
            "user_rx_snr_db": 10 * math.log10(snr),
        }

    # --- object construction --------------------------------------------
    def array_config(self) -> ArrayConfig:
        return ArrayConfig(n_t=self.n_t, n_r=self.n_r, spacing=self.spacing)

    def pose(self) -> TargetPose:
        return TargetPose(d_o=self.d_o_m, phi_o=math.radians(self.phi_o_deg), varphi=math.radians(self.varphi_deg))

    def partition(self):
        return partition_los(self.tfs(), self.pose(), bs_position=tuple(self.bs_position_m), K=self.k,
                             normalize=self.normalize, x_convention=self.x_convention)

    def sensing(self) -> SensingParams:
        return SensingParams.at_distance(self.d_o_m, self.sigma_s2, t_s=self.t_s_s, bandwidth=self.bandwidth_hz)

    def channel(self):
        return gen_channel(self.array_config(), np.radians(self.dirs_deg), self.path_loss_db, L=self.paths,
                           los_fraction=self.los_fraction, seed=self.channel_seed)

    def constraints(self) -> DesignConstraints:
        return DesignConstraints(p_t=self.p_t, gamma=self.gamma, sigma_n2=self.sigma_n2, coverage=self.coverage)

    def build(self) -> IsacSystem:
        self.validate()
        return IsacSystem(cfg=self.array_config(), channel=self.channel(), partition=self.partition(),
                          constraints=self.constraints(), sensing=self.sensing(), tol=self.tol,
                          max_iter=self.max_iter, max_attempts=self.max_attempts)

    # --- sweeps ---------------------------------------------------------
    def with_value(self, key: str, value) -> "Scenario":
        """Copy with one sweep key set; the radar-SNR hold keeps its original reference."""
        if key not in SWEEP_KEYS:
            raise ScenarioError(f"cannot sweep {key!r}; choose from {sorted(SWEEP_KEYS)}")
        new = copy.deepcopy(self)
        if new.radar_snr_hold and new.hold_reference is None:
            new.hold_reference = {"d_o_m": self.d_o_m, "sigma_s2_dbm": self.sigma_s2_dbm}
        if key == "n_c":
            n = int(round(value))
            if not 1 <= n <= len(self.dirs_deg):
                raise ScenarioError(f"n_c={n} outside 1..{len(self.dirs_deg)} user directions")
            new.dirs_deg = list(self.dirs_deg[:n])
        elif key == "k":
            new.k = int(round(value))
        else:
            setattr(new, key, float(value))
        return new

    # --- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for section, keys in _SECTIONS.items():
            out[section] = {key: _plain(getattr(self, key)) for key in keys}
        if self.hold_reference is not None:
            out["sensing"]["hold_reference"] = _plain(self.hold_reference)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario file must be a mapping of sections")
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for section, body in data.items():
            if section not in _SECTIONS:
                raise ScenarioError(f"unknown section {section!r}")
            if not isinstance(body, dict):
                raise ScenarioError(f"section {section!r} must be a mapping")
            for key, value in body.items():
                if key == "hold_reference" and section == "sensing":
                    kwargs[key] = value
                    continue
                if key not in _SECTIONS[section] or key not in known:
                    raise ScenarioError(f"unknown key {section}.{key}")
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def default_scenario(**overrides) -> Scenario:
    return dataclasses.replace(Scenario(), **overrides)


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(s.to_dict(), sort_keys=False, default_flow_style=None)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = yaml.safe_load(text)
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return Scenario.from_dict(data or {}).validate()
