"""Reference ratios, density reports, and side-by-side method comparisons.

Densities come in two flavors that are both reported: the Monte Carlo union
fraction (exact even under triple overlaps) and the pairwise-subtraction
formula (N * ball volume - pairwise overlap) / container volume.  The two
disagree when triple intersections exist; neither is "corrected", the
report just flags the condition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import (
    Layout,
    PackingInstance,
    ball_volume,
    has_pairwise_triple,
    mc_density,
    total_overlap,
)
from .records import RunRecord, TraceRow

# Best-known small-to-large ratios: r*/R for balls, r*/(s/2) for boxes,
# keyed by (container kind, dim, N).  "published" entries are reported
# best-known values; "derived" entries follow from elementary geometry and
# are re-checked against the baseline optimizer in the test suite.
REFERENCE_RATIOS: dict[tuple[str, int, int], "ReferenceEntry"] = {}


@dataclass(frozen=True)
class ReferenceEntry:
    ratio: float
    provenance: str  # "published" or "derived"

    def __post_init__(self) -> None:
        if not (0.0 < self.ratio <= 1.0):
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.provenance not in ("published", "derived"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


def _ref(kind: str, dim: int, n: int, ratio: float, provenance: str) -> None:
    REFERENCE_RATIOS[(kind, dim, n)] = ReferenceEntry(ratio, provenance)


_ref("ball", 2, 2, 0.5, "derived")
_ref("ball", 2, 3, 2.0 * math.sqrt(3.0) - 3.0, "derived")
_ref("ball", 2, 4, math.sqrt(2.0) - 1.0, "derived")
_ref("ball", 2, 7, 0.33333, "published")
_ref("ball", 2, 13, 0.2360679775, "published")
_ref("ball", 2, 14, 0.2310307, "published")
_ref("ball", 3, 15, 0.318304823, "published")
_ref("box", 3, 15, 2.0 * 0.192307692, "published")


def best_known_ratio(kind: str, dim: int, n: int) -> ReferenceEntry | None:
    return REFERENCE_RATIOS.get((kind, dim, n))


def best_known_radius(instance_or_container, n: int | None = None) -> float | None:
    """Best-known small radius for this container and count, if tabulated."""
    if isinstance(instance_or_container, PackingInstance):
        container = instance_or_container.container
        n = instance_or_container.count
    else:
        container = instance_or_container
        if n is None:
            raise ValueError("count required when passing a bare container")
    entry = best_known_ratio(container.kind, container.dim, n)
    if entry is None:
        return None
    half = container.extent if container.kind == "ball" else container.extent / 2.0
    return entry.ratio * half


def reference_density(instance: PackingInstance) -> float | None:
    """Density of the best-known packing for this (container, N), if known."""
    r_star = best_known_radius(instance)
    if r_star is None:
        return None
    dim = instance.container.dim
    return instance.count * ball_volume(r_star, dim) / instance.container.volume


@dataclass
class DensityReport:
    density: float
    std_error: float
    overlap_length: float
    overlap_measure: float
    formula_density: float
    samples: int
    seed: int
    possible_triple_overlap: bool


def density_report(layout: Layout, samples: int, seed: int) -> DensityReport:
    """Monte Carlo union density plus the closed-form pairwise quantities."""
    estimate, std_error = mc_density(layout, samples, seed)
    overlap_len = total_overlap(layout, "length")
    overlap_measure = total_overlap(layout, "area_or_volume")
    inst = layout.instance
    small_total = inst.count * ball_volume(inst.small_radius, inst.container.dim)
    formula = (small_total - overlap_measure) / inst.container.volume
    return DensityReport(
        density=estimate,
        std_error=std_error,
        overlap_length=overlap_len,
        overlap_measure=overlap_measure,
        formula_density=formula,
        samples=samples,
        seed=seed,
        possible_triple_overlap=has_pairwise_triple(layout),
    )


def density_report_to_dict(report: DensityReport) -> dict:
    return {
        "density": report.density,
        "std_error": report.std_error,
        "overlap_length": report.overlap_length,
        "overlap_measure": report.overlap_measure,
        "formula_density": report.formula_density,
        "samples": report.samples,
        "seed": report.seed,
        "possible_triple_overlap": report.possible_triple_overlap,
    }


def attach_density_metrics(record: RunRecord, samples: int, seed: int) -> DensityReport:
    """Compute density metrics for the record's best layout and fold them
    into its metrics dict (keys prefixed with ``density``)."""
    report = density_report(record.best_layout(), samples, seed)
    record.metrics.update(
        {
            "density": report.density,
            "density_std_error": report.std_error,
            "density_formula": report.formula_density,
            "density_samples": samples,
            "density_seed": seed,
            "possible_triple_overlap": report.possible_triple_overlap,
        }
    )
    return report


METHOD_LABELS = {
    "packer": "encoder-decoder",
    "baseline": "baseline (projected gradient)",
}


@dataclass
class ComparisonRow:
    method: str
    label: str
    overlap_length: float
    overlap_measure: float
    density: float
    std_error: float
    formula_density: float
    steps: int | None
    seed: int
    wall_time_s: float | None = None  # text report only, never serialized


@dataclass
class ComparisonReport:
    instance: PackingInstance
    samples: int
    seed: int
    rows: list[ComparisonRow] = field(default_factory=list)
    reference_density: float | None = None


def compare(
    instance: PackingInstance, run_records: list[RunRecord], samples: int, seed: int
) -> ComparisonReport:
    """Side-by-side metrics for runs on one instance, all measured with the
    same Monte Carlo seed and sample count; sorted by overlap length."""
    rows = []
    for record in run_records:
        if record.instance != instance:
            raise ValueError(
                f"record instance {record.instance} does not match report instance {instance}"
            )
        report = density_report(record.best_layout(), samples, seed)
        steps = record.config.get("epochs", record.config.get("iters"))
        rows.append(
            ComparisonRow(
                method=record.method,
                label=METHOD_LABELS.get(record.method, record.method),
                overlap_length=report.overlap_length,
                overlap_measure=report.overlap_measure,
                density=report.density,
                std_error=report.std_error,
                formula_density=report.formula_density,
                steps=steps,
                seed=record.seed,
                wall_time_s=record.wall_time_s,
            )
        )
    rows.sort(key=lambda row: (row.overlap_length, row.label, row.seed))
    return ComparisonReport(
        instance=instance,
        samples=samples,
        seed=seed,
        rows=rows,
        reference_density=reference_density(instance),
    )


def comparison_to_json_dict(report: ComparisonReport) -> dict:
    inst = report.instance
    return {
        "schema": "packing-comparison/1",
        "instance": {
            "container": {
                "kind": inst.container.kind,
                "dim": inst.container.dim,
                "extent": inst.container.extent,
            },
            "count": inst.count,
            "small_radius": inst.small_radius,
        },
        "samples": report.samples,
        "seed": report.seed,
        "reference_density": report.reference_density,
        "rows": [
            {
                "method": row.method,
                "label": row.label,
                "overlap_length": row.overlap_length,
                "overlap_measure": row.overlap_measure,
                "density": row.density,
                "std_error": row.std_error,
                "formula_density": row.formula_density,
                "steps": row.steps,
                "seed": row.seed,
            }
            for row in report.rows
        ],
    }


def comparison_text(report: ComparisonReport) -> str:
    """Aligned-column plain-text rendering (includes wall time when known)."""
    inst = report.instance
    cont = inst.container
    shape = {"ball": {2: "circle", 3: "sphere"}, "box": {2: "square", 3: "cube"}}[cont.kind][
        cont.dim
    ]
    lines = [
        f"instance: N={inst.count} r={inst.small_radius:.10g} in {shape} "
        f"(extent {cont.extent:.10g}), MC samples={report.samples} seed={report.seed}"
    ]
    if report.reference_density is not None:
        lines.append(f"best-known density: {report.reference_density:.6f}")
    header = (
        f"{'method':<30} {'seed':>5} {'overlap_len':>12} {'overlap_meas':>12} "
        f"{'density':>10} {'+/-':>9} {'formula':>10} {'steps':>7} {'wall_s':>8}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for row in report.rows:
        wall = f"{row.wall_time_s:8.2f}" if row.wall_time_s is not None else "       -"
        steps = f"{row.steps:7d}" if row.steps is not None else "      -"
        lines.append(
            f"{row.label:<30} {row.seed:>5} {row.overlap_length:12.6g} "
            f"{row.overlap_measure:12.6g} {row.density:10.6f} {row.std_error:9.2e} "
            f"{row.formula_density:10.6f} {steps} {wall}"
        )
    return "\n".join(lines) + "\n"


def save_comparison(report: ComparisonReport, json_path: str | Path, text_path: str | Path) -> None:
    Path(json_path).write_text(json.dumps(comparison_to_json_dict(report), indent=2) + "\n")
    Path(text_path).write_text(comparison_text(report))


def trace_export(record: RunRecord) -> list[TraceRow]:
    """Plottable (epoch, loss, overlap_length, p) table for a run."""
    return list(record.trace)
