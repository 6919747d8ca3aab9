"""SLE(kappa, rho) driven growth in polygons via time-dependent Schwarz-Christoffel maps."""
from ._accel import backend
from .geometry import (
    AT_INFINITY,
    ConfigError,
    Corner,
    PolygonSnapshot,
    PrevertexConfig,
    exterior_angle_sum,
    rho_beta_convert,
    validate_config,
)
from .driving import (
    DrivingPath,
    DrivingState,
    collision_time,
    rescale_to_rho_time,
    simulate_driver,
    simulate_metric_driver,
    step_driver,
)
from .loewner import FlowResult, TraceSample, compute_trace, flow_point, swallow_order
from .scmap import (
    CorrectedMap,
    ScEvaluator,
    corner_trajectory,
    corrected_map_eval,
    drift_correction_rate,
    polygon_snapshot,
    sc_deriv,
    sc_eval,
    sc_log_deriv_sum,
)
from .special import hyp2f1
from .stats import EnsembleStats, TimeChange

__version__ = "0.1.0"

__all__ = [
    "AT_INFINITY", "ConfigError", "Corner", "CorrectedMap", "DrivingPath", "DrivingState",
    "EnsembleStats", "FlowResult", "PolygonSnapshot", "PrevertexConfig", "ScEvaluator",
    "TimeChange", "TraceSample", "backend", "collision_time", "compute_trace",
    "corner_trajectory", "corrected_map_eval", "drift_correction_rate", "exterior_angle_sum",
    "flow_point", "hyp2f1", "polygon_snapshot", "rescale_to_rho_time", "rho_beta_convert",
    "sc_deriv", "sc_eval", "sc_log_deriv_sum", "simulate_driver", "simulate_metric_driver",
    "step_driver", "swallow_order", "validate_config",
]
