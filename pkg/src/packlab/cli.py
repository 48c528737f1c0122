"""Command-line interface: pack, baseline, bench, density, render.

Artifacts are written into --out-dir (default: $PACK_OUT_DIR, else the
current directory).  Flags override values from an optional JSON config
file (--config), which overrides built-in defaults.  All JSON/CSV/SVG
artifacts are byte-identical across reruns with the same arguments.

Exit codes: 0 success, 2 invalid arguments, 3 run aborted (non-finite
loss; diagnostic JSON still written).  bench exits 0 if at least one cell
succeeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import baseline as baseline_mod
from . import packer as packer_mod
from . import report as report_mod
from .figures import save_density_figure, save_trace_figure
from .geometry import Container, Layout, PackingInstance
from .records import (
    RunRecord,
    TraceRow,
    read_centers_csv,
    write_centers_csv,
    write_trace_csv,
)
from .render import render_svg

P_STUDY_FIXED = (2.0, 0.5, 0.2, 0.1)

# Defaults for the Fig. 3-style study instance (thirteen circles, the
# largest of the reference instances with published radii).
P_STUDY_INSTANCE = {"container": "ball", "dim": 2, "R": 0.9, "N": 13, "r": 0.2360679775}


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get("PACK_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config_file(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    doc = json.loads(Path(args.config).read_text())
    if not isinstance(doc, dict):
        raise ValueError("config file must contain a JSON object")
    return doc


def _resolve(args, file_cfg: dict, key: str, default):
    """Precedence: explicit flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_cfg:
        return file_cfg[key]
    return default


def _parse_schedule(text: str) -> tuple[tuple[int, float], ...]:
    entries = []
    for part in text.split(","):
        start, _, p = part.partition(":")
        entries.append((int(start.strip()), float(p.strip())))
    return tuple(entries)


def _parse_seeds(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_sweep(text: str) -> list[int]:
    """Accepts "2..16" ranges or comma lists."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _instance_from(args, file_cfg: dict, defaults: dict | None = None) -> PackingInstance:
    defaults = defaults or {}
    kind = _resolve(args, file_cfg, "container", defaults.get("container"))
    dim = _resolve(args, file_cfg, "dim", defaults.get("dim"))
    count = _resolve(args, file_cfg, "N", defaults.get("N"))
    r = _resolve(args, file_cfg, "r", defaults.get("r"))
    if kind is None or dim is None or count is None or r is None:
        raise ValueError("an instance needs --container, --dim, --N, and --r")
    if kind == "ball":
        extent = _resolve(args, file_cfg, "R", defaults.get("R"))
        if extent is None:
            raise ValueError("ball containers need --R")
    else:
        extent = _resolve(args, file_cfg, "s", defaults.get("s"))
        if extent is None:
            raise ValueError("box containers need --s")
    return PackingInstance(Container(kind, int(dim), float(extent)), int(count), float(r))


def _train_config_from(args, file_cfg: dict) -> packer_mod.TrainConfig:
    schedule = _resolve(args, file_cfg, "schedule", None)
    if isinstance(schedule, str):
        schedule = _parse_schedule(schedule)
    cfg = packer_mod.TrainConfig(
        epochs=int(_resolve(args, file_cfg, "epochs", 20000)),
        learning_rate=_resolve(args, file_cfg, "lr", None),
        rng_seed=int(_resolve(args, file_cfg, "seed", 0)),
        snapshot_every=int(_resolve(args, file_cfg, "snapshot_every", 100)),
        perturb_draws=int(_resolve(args, file_cfg, "perturb_draws", 1)),
        optimizer=str(_resolve(args, file_cfg, "optimizer", "sgd")),
    )
    return cfg


def _pspec_from(args, file_cfg: dict, instance: PackingInstance) -> packer_mod.PerturbationSpec:
    schedule = _resolve(args, file_cfg, "schedule", None)
    if schedule is None:
        return packer_mod.PerturbationSpec(instance.small_radius)
    if isinstance(schedule, str):
        schedule = _parse_schedule(schedule)
    return packer_mod.PerturbationSpec(instance.small_radius, tuple(schedule))


def _write_run_artifacts(args, record: RunRecord, out: Path, prefix: str = "") -> None:
    mc_samples = int(getattr(args, "mc_samples", None) or 2_000_000)
    mc_seed = int(getattr(args, "mc_seed", None) or 0)
    report_mod.attach_density_metrics(record, mc_samples, mc_seed)
    record.save(out / f"{prefix}run.json")
    write_centers_csv(out / f"{prefix}centers.csv", record.best_centers)
    write_trace_csv(out / f"{prefix}trace.csv", record.trace)
    (out / f"{prefix}layout.svg").write_text(render_svg(record.best_layout()))
    save_trace_figure(out / f"{prefix}trace.png", {record.method: record.trace})


def cmd_pack(args) -> int:
    try:
        file_cfg = _load_config_file(args)
        instance = _instance_from(args, file_cfg)
        config = _train_config_from(args, file_cfg)
        pspec = _pspec_from(args, file_cfg, instance)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    out = _out_dir(args)
    started = time.perf_counter()
    record = packer_mod.train(instance, pspec, config)
    record.wall_time_s = time.perf_counter() - started
    _write_run_artifacts(args, record, out)
    print(
        f"pack: status={record.status} best_overlap={record.metrics['best_overlap_length']:.6g} "
        f"density={record.metrics['density']:.6f} artifacts in {out}"
    )
    if record.status != "ok":
        print(f"aborted: {record.diagnostic}", file=sys.stderr)
        return 3
    return 0


def cmd_baseline(args) -> int:
    try:
        file_cfg = _load_config_file(args)
        instance = _instance_from(args, file_cfg)
        config = baseline_mod.BaselineConfig(
            restarts=int(_resolve(args, file_cfg, "restarts", 10)),
            iters=int(_resolve(args, file_cfg, "iters", 20000)),
            step_size=_resolve(args, file_cfg, "step_size", None),
            rng_seed=int(_resolve(args, file_cfg, "seed", 0)),
            snapshot_every=int(_resolve(args, file_cfg, "snapshot_every", 100)),
        )
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    out = _out_dir(args)
    started = time.perf_counter()
    record = baseline_mod.baseline_pack(instance, config)
    record.wall_time_s = time.perf_counter() - started
    _write_run_artifacts(args, record, out)
    print(
        f"baseline: best_overlap={record.metrics['best_overlap_length']:.6g} "
        f"density={record.metrics['density']:.6f} artifacts in {out}"
    )
    return 0


def _layout_from(args, file_cfg: dict) -> Layout:
    if getattr(args, "from_json", None):
        record = RunRecord.load(args.from_json)
        return record.best_layout()
    if getattr(args, "from_csv", None):
        centers = read_centers_csv(args.from_csv)
        instance = _instance_from(args, file_cfg, defaults={"N": centers.shape[0]})
        if instance.count != centers.shape[0]:
            raise ValueError(
                f"CSV holds {centers.shape[0]} centers but --N is {instance.count}"
            )
        return Layout(instance, centers)
    raise ValueError("provide --from-json or --from-csv")


def cmd_density(args) -> int:
    try:
        file_cfg = _load_config_file(args)
        layout = _layout_from(args, file_cfg)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    out = _out_dir(args)
    samples = int(args.mc_samples or 2_000_000)
    seed = int(args.mc_seed or 0)
    rep = report_mod.density_report(layout, samples, seed)
    doc = report_mod.density_report_to_dict(rep)
    (out / "density.json").write_text(json.dumps(doc, indent=2) + "\n")
    lines = [f"{key} = {value}" for key, value in doc.items()]
    text = "\n".join(lines) + "\n"
    (out / "density.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_render(args) -> int:
    try:
        file_cfg = _load_config_file(args)
        layout = _layout_from(args, file_cfg)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    out_path = Path(args.out) if args.out else _out_dir(args) / "layout.svg"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(render_svg(layout))
    print(f"wrote {out_path}")
    return 0


def _instance_payload(instance: PackingInstance) -> dict:
    return {
        "kind": instance.container.kind,
        "dim": instance.container.dim,
        "extent": instance.container.extent,
        "count": instance.count,
        "r": instance.small_radius,
    }


def _instance_from_payload(doc: dict) -> PackingInstance:
    return PackingInstance(
        Container(doc["kind"], int(doc["dim"]), float(doc["extent"])),
        int(doc["count"]),
        float(doc["r"]),
    )


def _run_cell(payload: dict) -> dict:
    """One bench cell, executed in a worker; writes its own trace CSV."""
    instance = _instance_from_payload(payload["instance"])
    started = time.perf_counter()
    if payload["method"] == "packer":
        config = packer_mod.TrainConfig(
            epochs=payload["epochs"],
            rng_seed=payload["seed"],
            snapshot_every=payload["snapshot_every"],
            optimizer=payload["optimizer"],
        )
        pspec = packer_mod.PerturbationSpec(
            instance.small_radius, tuple(tuple(e) for e in payload["schedule"])
        )
        record = packer_mod.train(instance, pspec, config)
    else:
        record = baseline_mod.baseline_pack(
            instance,
            baseline_mod.BaselineConfig(
                restarts=payload["restarts"],
                iters=payload["iters"],
                rng_seed=payload["seed"],
                snapshot_every=payload["snapshot_every"],
            ),
        )
    wall = time.perf_counter() - started
    write_trace_csv(payload["trace_path"], record.trace)
    rep = report_mod.density_report(
        record.best_layout(), payload["mc_samples"], payload["mc_seed"]
    )
    return {
        "cell": payload["cell"],
        "method": payload["method"],
        "seed": payload["seed"],
        "status": record.status,
        "final_overlap": record.metrics["final_overlap_length"],
        "best_overlap": record.metrics["best_overlap_length"],
        "density": rep.density,
        "density_std_error": rep.std_error,
        "formula_density": rep.formula_density,
        "trace": [[row.epoch, row.loss, row.overlap_length, row.p] for row in record.trace],
        "wall_time_s": wall,
    }


def _run_cells(cells: list[dict], workers: int) -> tuple[list[dict], list[dict]]:
    results, failures = [], []
    if workers <= 1:
        for cell in cells:
            try:
                results.append(_run_cell(cell))
            except Exception as exc:  # cell failures are recorded, not fatal
                failures.append({"cell": cell["cell"], "error": str(exc)})
        return results, failures
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_run_cell, cell): cell for cell in cells}
        for future, cell in futures.items():
            try:
                results.append(future.result())
            except Exception as exc:
                failures.append({"cell": cell["cell"], "error": str(exc)})
    results.sort(key=lambda res: res["cell"])
    return results, failures


def _bench_p_study(args, file_cfg: dict, out: Path, seeds: list[int], workers: int) -> int:
    instance = _instance_from(args, file_cfg, defaults=P_STUDY_INSTANCE)
    epochs = int(_resolve(args, file_cfg, "epochs", 20000))
    snapshot = int(_resolve(args, file_cfg, "snapshot_every", 100))
    optimizer = str(_resolve(args, file_cfg, "optimizer", "sgd"))
    mc_samples = int(_resolve(args, file_cfg, "mc_samples", 2_000_000))
    mc_seed = int(_resolve(args, file_cfg, "mc_seed", 0))
    variants: list[tuple[str, tuple[tuple[int, float], ...]]] = [
        (f"p{p:g}", ((0, p),)) for p in P_STUDY_FIXED
    ]
    variants.append(("scheduled", packer_mod.DEFAULT_SCHEDULE))
    cells = []
    for label, schedule in variants:
        for seed in seeds:
            name = f"{label}_seed{seed}"
            cells.append(
                {
                    "cell": name,
                    "method": "packer",
                    "instance": _instance_payload(instance),
                    "epochs": epochs,
                    "seed": seed,
                    "snapshot_every": snapshot,
                    "optimizer": optimizer,
                    "schedule": [list(e) for e in schedule],
                    "mc_samples": mc_samples,
                    "mc_seed": mc_seed,
                    "trace_path": str(out / f"trace_{name}.csv"),
                }
            )
    results, failures = _run_cells(cells, workers)
    if not results:
        print(json.dumps({"failures": failures}, indent=2), file=sys.stderr)
        return 1

    by_variant: dict[str, list[dict]] = {}
    for res in results:
        label = res["cell"].rsplit("_seed", 1)[0]
        by_variant.setdefault(label, []).append(res)
    summary_rows = []
    for label, rows in by_variant.items():
        finals = [row["final_overlap"] for row in rows]
        bests = [row["best_overlap"] for row in rows]
        summary_rows.append(
            {
                "variant": label,
                "median_final_overlap": float(np.median(finals)),
                "median_best_overlap": float(np.median(bests)),
                "seeds": [row["seed"] for row in rows],
            }
        )
    medians = {row["variant"]: row["median_final_overlap"] for row in summary_rows}
    flagged = None
    if "scheduled" in medians and "p0.1" in medians:
        flagged = bool(medians["scheduled"] > medians["p0.1"])
    summary = {
        "schema": "packing-p-study/1",
        "instance": _instance_payload(instance),
        "epochs": epochs,
        "rows": summary_rows,
        "schedule_worse_than_fixed_p0.1": flagged,
        "failures": failures,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    lines = [f"p-study on N={instance.count}: median final overlap by variant"]
    for row in sorted(summary_rows, key=lambda r: r["median_final_overlap"]):
        lines.append(f"  {row['variant']:<10} {row['median_final_overlap']:.6f}")
    if flagged:
        lines.append("FLAG: schedule did not beat fixed p=0.1 on this run")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")

    median_traces: dict[str, list[TraceRow]] = {}
    for label, rows in by_variant.items():
        arr = np.array([[pt[2] for pt in row["trace"]] for row in rows])
        epochs_axis = [pt[0] for pt in rows[0]["trace"]]
        med = np.median(arr, axis=0)
        median_traces[label] = [
            TraceRow(int(e), float("nan"), float(v), None) for e, v in zip(epochs_axis, med)
        ]
    save_trace_figure(out / "p_study.png", median_traces, title="overlap vs epoch (median)")
    return 0


def _sweep_radius(container: Container, n: int) -> float:
    entry = report_mod.best_known_ratio(container.kind, container.dim, n)
    half = container.extent if container.kind == "ball" else container.extent / 2.0
    if entry is not None:
        return entry.ratio * half
    # labeled stand-in rule for counts without a tabulated ratio
    return 0.7 * half * n ** (-1.0 / container.dim)


def _bench_density(args, file_cfg: dict, out: Path, seeds: list[int], workers: int) -> int:
    kind = str(_resolve(args, file_cfg, "container", "ball"))
    dim = int(_resolve(args, file_cfg, "dim", 3))
    extent = _resolve(args, file_cfg, "R" if kind == "ball" else "s", 1.0)
    container = Container(kind, dim, float(extent))
    sweep = _resolve(args, file_cfg, "sweep_n", "2..16")
    counts = _parse_sweep(sweep) if isinstance(sweep, str) else [int(n) for n in sweep]
    if not counts:
        return _fail("empty sweep list")
    epochs = int(_resolve(args, file_cfg, "epochs", 20000))
    iters = int(_resolve(args, file_cfg, "iters", 20000))
    restarts = int(_resolve(args, file_cfg, "restarts", 10))
    snapshot = int(_resolve(args, file_cfg, "snapshot_every", 100))
    optimizer = str(_resolve(args, file_cfg, "optimizer", "sgd"))
    mc_samples = int(_resolve(args, file_cfg, "mc_samples", 2_000_000))
    mc_seed = int(_resolve(args, file_cfg, "mc_seed", 0))
    cells = []
    for n in counts:
        instance = PackingInstance(container, n, _sweep_radius(container, n))
        for method in ("packer", "baseline"):
            for seed in seeds:
                name = f"N{n}_{method}_seed{seed}"
                cells.append(
                    {
                        "cell": name,
                        "method": method,
                        "instance": _instance_payload(instance),
                        "epochs": epochs,
                        "iters": iters,
                        "restarts": restarts,
                        "seed": seed,
                        "snapshot_every": snapshot,
                        "optimizer": optimizer,
                        "schedule": [list(e) for e in packer_mod.DEFAULT_SCHEDULE],
                        "mc_samples": mc_samples,
                        "mc_seed": mc_seed,
                        "trace_path": str(out / f"trace_{name}.csv"),
                    }
                )
    results, failures = _run_cells(cells, workers)
    if not results:
        print(json.dumps({"failures": failures}, indent=2), file=sys.stderr)
        return 1

    rows = []
    series: dict[str, list[float | None]] = {"packer": [], "baseline": []}
    reference: list[float | None] = []
    for n in counts:
        instance = PackingInstance(container, n, _sweep_radius(container, n))
        ref = report_mod.reference_density(instance)
        reference.append(ref)
        for method in ("packer", "baseline"):
            cell_rows = [
                res
                for res in results
                if res["method"] == method and res["cell"].startswith(f"N{n}_")
            ]
            if not cell_rows:
                series[method].append(None)
                continue
            best = min(cell_rows, key=lambda res: res["best_overlap"])
            series[method].append(best["density"])
            rows.append(
                {
                    "N": n,
                    "r": instance.small_radius,
                    "radius_rule": "table"
                    if report_mod.best_known_ratio(kind, dim, n)
                    else "0.7*half*N^(-1/dim)",
                    "method": method,
                    "best_overlap": best["best_overlap"],
                    "density": best["density"],
                    "density_std_error": best["density_std_error"],
                    "formula_density": best["formula_density"],
                    "reference_density": ref,
                }
            )
    summary = {
        "schema": "packing-density-sweep/1",
        "container": {"kind": kind, "dim": dim, "extent": float(extent)},
        "counts": counts,
        "rows": rows,
        "failures": failures,
    }
    (out / "density_sweep.json").write_text(json.dumps(summary, indent=2) + "\n")
    header = f"{'N':>3} {'r':>12} {'method':<10} {'overlap':>10} {'density':>9} {'reference':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        ref = f"{row['reference_density']:.6f}" if row["reference_density"] else "-"
        lines.append(
            f"{row['N']:>3} {row['r']:>12.8f} {row['method']:<10} "
            f"{row['best_overlap']:>10.4g} {row['density']:>9.6f} {ref:>10}"
        )
    text = "\n".join(lines) + "\n"
    (out / "density_sweep.txt").write_text(text)
    print(text, end="")
    save_density_figure(
        out / "density_sweep.png",
        counts,
        series,
        reference,
        title=f"packing density, {kind} dim={dim}",
    )
    return 0


def cmd_bench(args) -> int:
    try:
        file_cfg = _load_config_file(args)
        seeds = _parse_seeds(_resolve(args, file_cfg, "seeds", "1,2,3"))
        if not seeds:
            return _fail("empty seed list")
        out = _out_dir(args)
        workers = int(_resolve(args, file_cfg, "workers", 0)) or min(
            os.cpu_count() or 1, 8
        )
        if args.mode == "p-study":
            return _bench_p_study(args, file_cfg, out, seeds, workers)
        return _bench_density(args, file_cfg, out, seeds, workers)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))


def _add_instance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--container", choices=["ball", "box"])
    parser.add_argument("--dim", type=int, choices=[2, 3])
    parser.add_argument("--R", type=float, help="ball radius")
    parser.add_argument("--s", type=float, help="box side length")
    parser.add_argument("--N", type=int, help="number of objects")
    parser.add_argument("--r", type=float, help="small radius")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", help="output directory (default $PACK_OUT_DIR or .)")
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--mc-samples", type=int, help="Monte Carlo samples (default 2e6)")
    parser.add_argument("--mc-seed", type=int, help="Monte Carlo seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packlab",
        description="pack circles/spheres with an encoder-perturbation-decoder "
        "network or a projected-gradient baseline, and measure the results",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pack = sub.add_parser("pack", help="train the encoder-decoder packer")
    _add_instance_flags(pack)
    _add_common_flags(pack)
    pack.add_argument("--seed", type=int)
    pack.add_argument("--epochs", type=int)
    pack.add_argument("--schedule", help='p schedule, e.g. "0:2,10000:0.2"')
    pack.add_argument("--lr", type=float)
    pack.add_argument("--optimizer", choices=["sgd", "adam"])
    pack.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    pack.add_argument("--perturb-draws", type=int, dest="perturb_draws")
    pack.set_defaults(func=cmd_pack)

    base = sub.add_parser("baseline", help="projected-gradient baseline")
    _add_instance_flags(base)
    _add_common_flags(base)
    base.add_argument("--seed", type=int)
    base.add_argument("--restarts", type=int)
    base.add_argument("--iters", type=int)
    base.add_argument("--step-size", type=float, dest="step_size")
    base.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    base.set_defaults(func=cmd_baseline)

    bench = sub.add_parser("bench", help="multi-cell studies with a merged report")
    _add_instance_flags(bench)
    _add_common_flags(bench)
    bench.add_argument("--mode", choices=["p-study", "density"], default="p-study")
    bench.add_argument("--seeds", help='comma list, e.g. "1,2,3"')
    bench.add_argument("--sweep-n", dest="sweep_n", help='count sweep, e.g. "2..16"')
    bench.add_argument("--epochs", type=int)
    bench.add_argument("--iters", type=int)
    bench.add_argument("--restarts", type=int)
    bench.add_argument("--optimizer", choices=["sgd", "adam"])
    bench.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    bench.add_argument("--workers", type=int)
    bench.set_defaults(func=cmd_bench)

    density = sub.add_parser("density", help="measure a layout from CSV or a run record")
    _add_instance_flags(density)
    _add_common_flags(density)
    density.add_argument("--from-csv", dest="from_csv", help="centers CSV (index,x,y[,z])")
    density.add_argument("--from-json", dest="from_json", help="run record JSON")
    density.set_defaults(func=cmd_density)

    render = sub.add_parser("render", help="render a layout to SVG")
    _add_instance_flags(render)
    _add_common_flags(render)
    render.add_argument("--from-csv", dest="from_csv")
    render.add_argument("--from-json", dest="from_json")
    render.add_argument("--out", help="output SVG path")
    render.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
