"""Circle/sphere packing via an encoder-perturbation-decoder network, with a
projected-gradient baseline and Monte Carlo geometry metrics."""

from .baseline import BaselineConfig, baseline_pack
from .geometry import (
    Container,
    Layout,
    PackingInstance,
    ball_volume,
    lens_area,
    lens_volume,
    mc_density,
    overlap_length,
    project_center,
    total_overlap,
)
from .packer import (
    PackerModel,
    PerturbationSpec,
    TrainConfig,
    encode_centers,
    sample_perturbation,
    scheduled_p,
    train,
)
from .records import RunRecord, TraceRow
from .report import ComparisonReport, DensityReport, best_known_ratio, compare, density_report

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "ComparisonReport",
    "Container",
    "DensityReport",
    "Layout",
    "PackerModel",
    "PackingInstance",
    "PerturbationSpec",
    "RunRecord",
    "TraceRow",
    "TrainConfig",
    "ball_volume",
    "baseline_pack",
    "best_known_ratio",
    "compare",
    "density_report",
    "encode_centers",
    "lens_area",
    "lens_volume",
    "mc_density",
    "overlap_length",
    "project_center",
    "sample_perturbation",
    "scheduled_p",
    "total_overlap",
    "train",
]
