"""Extended-object tracking with GGIW and trajectory GGIW PHD filters."""
from .common import BirthTemplate, EstimatedTrajectory, FilterConfig
from .distributions import GammaParams, GaussianParams, GGIWParams, InverseWishartParams
from .metrics import MetricConfig, MetricReport, gw_distance, rms_over_runs, trajectory_distance
from .models import MeasModel, MotionConfig
from .sim import ScenarioConfig, generate_scenario, generate_scan, monte_carlo

__version__ = "0.1.0"

__all__ = [
    "BirthTemplate", "EstimatedTrajectory", "FilterConfig", "GammaParams", "GaussianParams", "GGIWParams",
    "InverseWishartParams", "MetricConfig", "MetricReport", "gw_distance", "rms_over_runs",
    "trajectory_distance", "MeasModel", "MotionConfig", "ScenarioConfig", "generate_scenario",
    "generate_scan", "monte_carlo",
]
