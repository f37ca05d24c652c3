"""RGB-D from a monochrome event camera and a color-cycling structured-light projector."""

from .asl import ASLController, PatternLadder, SLCostModel, estimate_rates, fit_sl_cost
from .color import (
    ChannelCounts,
    ColorReconstructor,
    WhiteBalanceGains,
    accumulate_channels,
    calibrate_white_balance,
    counts_to_frame,
)
from .config import RunConfig, parse_config, parse_config_text
from .depth import (
    DotObservation,
    PointCloud,
    cluster_dots,
    colorize_cloud,
    correspond_and_triangulate,
    depth_from_moving_line,
)
from .errors import EventRGBDError
from .geometry import (
    PinholeModel,
    Ray,
    ScenePlane,
    backproject_ray,
    intersect_ray_plane,
    project,
    triangulate_rays,
)
from .metrics import MetricReport, histogram_correlation, metric_report, psnr, rmse_per_channel
from .patterns import (
    Pattern,
    SequencePlan,
    build_sequence,
    gen_dot_grid,
    gen_moving_line,
    gen_multi_line,
    gen_solid,
)
from .radiometry import IrradianceFrame, Renderer, SpectralPower, render_slot, shade_lambertian
from .sensor import SensorConfig, apply_bus_cap, sense

__version__ = "0.1.0"

__all__ = [
    "ASLController",
    "PatternLadder",
    "SLCostModel",
    "estimate_rates",
    "fit_sl_cost",
    "ChannelCounts",
    "ColorReconstructor",
    "WhiteBalanceGains",
    "accumulate_channels",
    "calibrate_white_balance",
    "counts_to_frame",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "DotObservation",
    "PointCloud",
    "cluster_dots",
    "colorize_cloud",
    "correspond_and_triangulate",
    "depth_from_moving_line",
    "EventRGBDError",
    "PinholeModel",
    "Ray",
    "ScenePlane",
    "backproject_ray",
    "intersect_ray_plane",
    "project",
    "triangulate_rays",
    "MetricReport",
    "histogram_correlation",
    "metric_report",
    "psnr",
    "rmse_per_channel",
    "Pattern",
    "SequencePlan",
    "build_sequence",
    "gen_dot_grid",
    "gen_moving_line",
    "gen_multi_line",
    "gen_solid",
    "IrradianceFrame",
    "Renderer",
    "SpectralPower",
    "render_slot",
    "shade_lambertian",
    "SensorConfig",
    "apply_bus_cap",
    "sense",
]
