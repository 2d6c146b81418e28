"""Cramér-Rao bounds and CRB-minimizing ISAC beamforming for extended targets."""

__version__ = "0.1.0"

from .array import ArrayConfig, beampattern, bundle, gen_channel, sinr_all, steering  # noqa: E402
from .contour import TargetPose, TfsContour, partition_los, preset  # noqa: E402
from .crb import SensingParams, crb_et, crb_pt, efim_schur, fim_numeric_oracle  # noqa: E402
from .design import design_isotropic, design_sdr, design_zf  # noqa: E402
from .scenario import Scenario, default_scenario, load_scenario  # noqa: E402
from .sim import monte_carlo_mse  # noqa: E402
from .system import DesignConstraints, IsacSystem  # noqa: E402

__all__ = [
    "ArrayConfig", "beampattern", "bundle", "gen_channel", "sinr_all", "steering",
    "TargetPose", "TfsContour", "partition_los", "preset",
    "SensingParams", "crb_et", "crb_pt", "efim_schur", "fim_numeric_oracle",
    "design_isotropic", "design_sdr", "design_zf",
    "Scenario", "default_scenario", "load_scenario",
    "monte_carlo_mse", "DesignConstraints", "IsacSystem",
]
