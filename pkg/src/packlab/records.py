"""Run records: the persistence unit for training and baseline runs.

A record echoes the resolved configuration, the seed, the snapshot trace,
and the final/best layouts, and serializes to a schema-tagged JSON document.
Wall-clock time is kept in memory only: persisted artifacts must be
byte-identical across reruns with the same seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Container, Layout, PackingInstance

RUN_SCHEMA = "packing-run/1"


@dataclass
class TraceRow:
    """One snapshot: loss and total overlap length at the start of an epoch.

    ``p`` is the perturbation exponent in effect (None for the baseline,
    which has no perturbation layer).
    """

    epoch: int
    loss: float
    overlap_length: float
    p: float | None = None


@dataclass
class RunRecord:
    method: str
    instance: PackingInstance
    config: dict
    seed: int
    trace: list[TraceRow]
    final_centers: np.ndarray = field(repr=False)
    best_centers: np.ndarray = field(repr=False)
    best_epoch: int
    metrics: dict
    status: str = "ok"
    diagnostic: str | None = None
    wall_time_s: float | None = None  # in-memory only, never serialized

    def final_layout(self) -> Layout:
        return Layout(self.instance, self.final_centers)

    def best_layout(self) -> Layout:
        return Layout(self.instance, self.best_centers)

    def to_json_dict(self) -> dict:
        inst = self.instance
        return {
            "schema": RUN_SCHEMA,
            "method": self.method,
            "instance": {
                "container": {
                    "kind": inst.container.kind,
                    "dim": inst.container.dim,
                    "extent": inst.container.extent,
                },
                "count": inst.count,
                "small_radius": inst.small_radius,
            },
            "config": self.config,
            "seed": self.seed,
            "status": self.status,
            "diagnostic": self.diagnostic,
            "trace": [[row.epoch, row.loss, row.overlap_length, row.p] for row in self.trace],
            "final_centers": self.final_centers.tolist(),
            "best_centers": self.best_centers.tolist(),
            "best_epoch": self.best_epoch,
            "metrics": self.metrics,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RunRecord":
        if doc.get("schema") != RUN_SCHEMA:
            raise ValueError(f"unsupported run schema {doc.get('schema')!r}")
        inst_doc = doc["instance"]
        cont = inst_doc["container"]
        instance = PackingInstance(
            container=Container(cont["kind"], int(cont["dim"]), float(cont["extent"])),
            count=int(inst_doc["count"]),
            small_radius=float(inst_doc["small_radius"]),
        )
        return cls(
            method=doc["method"],
            instance=instance,
            config=doc["config"],
            seed=int(doc["seed"]),
            trace=[
                TraceRow(int(e), float(l), float(o), None if p is None else float(p))
                for e, l, o, p in doc["trace"]
            ],
            final_centers=np.asarray(doc["final_centers"], dtype=np.float64),
            best_centers=np.asarray(doc["best_centers"], dtype=np.float64),
            best_epoch=int(doc["best_epoch"]),
            metrics=doc["metrics"],
            status=doc["status"],
            diagnostic=doc["diagnostic"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunRecord":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _fmt(x: float) -> str:
    # 17 significant digits round-trip any double exactly.
    return format(float(x), ".17g")


def write_centers_csv(path: str | Path, centers: np.ndarray) -> None:
    c = np.asarray(centers, dtype=np.float64)
    header = ["index", "x", "y"] + (["z"] if c.shape[1] == 3 else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, row in enumerate(c):
            writer.writerow([i] + [_fmt(v) for v in row])


def read_centers_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["index", "x", "y"]:
            raise ValueError(f"unexpected centers header {header!r}")
        rows = [[float(v) for v in row[1:]] for row in reader if row]
    dim = len(header) - 1
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)


def write_trace_csv(path: str | Path, trace: list[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "overlap_length", "p"])
        for row in trace:
            writer.writerow(
                [
                    row.epoch,
                    _fmt(row.loss),
                    _fmt(row.overlap_length),
                    "" if row.p is None else _fmt(row.p),
                ]
            )


def read_trace_csv(path: str | Path) -> list[TraceRow]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["epoch", "loss", "overlap_length", "p"]:
            raise ValueError(f"unexpected trace header {header!r}")
        for row in reader:
            if not row:
                continue
            out.append(
                TraceRow(
                    int(row[0]),
                    float(row[1]),
                    float(row[2]),
                    float(row[3]) if row[3] else None,
                )
            )
    return out
