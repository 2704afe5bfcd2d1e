"""Optimization campaign orchestration and run-directory persistence.

A run directory is self-describing: ``runlog.json`` echoes the full
configuration (object set inlined), so the archive can be re-evaluated cell
by cell for the determinism audit. ``archive.csv`` and ``metrics.csv`` are
byte-identical across repeats with the same seed; ``runlog.json`` also
carries wall-clock timings and is therefore excluded from that guarantee.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import RunConfig, config_from_dict, config_to_dict
from .design import benchmark_design, decode
from .features import features_of
from .grasp import ObjectSet, default_object_set, evaluate_design, load_object_set
from .qd import WORKSPACE_RANGE, ArchiveGrid, CMAEmitter, QDMetrics, run_generation
from .svg import heatmap_svg


@dataclass
class RunResult:
    archive: ArchiveGrid
    metrics: list[QDMetrics]
    out_dir: str
    total_wall_time: float


def volume_range_for(bounds=None) -> tuple[float, float]:
    """Archive volume range from the all-lower and all-upper designs.

    Rib tilt makes the true extremes drift slightly past these values;
    out-of-range volumes clamp into the boundary rows by design.
    """
    lo = features_of(decode(np.zeros(28))).volume
    hi = features_of(decode(np.ones(28))).volume
    return lo, hi


def build_archive(cfg: RunConfig) -> ArchiveGrid:
    return ArchiveGrid((cfg.archive_rows, cfg.archive_cols),
                       workspace_range=WORKSPACE_RANGE,
                       volume_range=volume_range_for())


def resolve_objects(cfg: RunConfig) -> ObjectSet:
    if cfg.objects:
        return load_object_set(cfg.objects)
    return default_object_set()


def make_evaluator(objects: ObjectSet, cfg: RunConfig):
    """genotype -> (success rate, features), the CMA-ME objective."""

    def evaluator(genotype):
        design = decode(np.clip(genotype, 0.0, 1.0))
        result = evaluate_design(design, objects, cfg.eval)
        return result.success_rate, result.features

    return evaluator


def run_optimization(cfg: RunConfig, progress=None) -> RunResult:
    """Run the configured campaign and write all artifacts to cfg.out_dir."""
    start = time.perf_counter()
    os.makedirs(cfg.out_dir, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    archive = build_archive(cfg)
    emitter = CMAEmitter(dim=28, sigma0=cfg.sigma0, lam=cfg.batch, rng=rng)
    objects = resolve_objects(cfg)
    evaluator = make_evaluator(objects, cfg)

    metrics: list[QDMetrics] = []
    eval_log: list = []
    evaluations = 0
    eval_times: list[float] = []
    for gen in range(1, cfg.generations + 1):
        t0 = time.perf_counter()
        snap = run_generation(emitter, archive, evaluator, rng=rng,
                              evaluations_so_far=evaluations,
                              evaluation_log=eval_log, parallel=cfg.parallel)
        evaluations += cfg.batch
        eval_times.append(time.perf_counter() - t0)
        metrics.append(QDMetrics(generation=gen, evaluations=evaluations,
                                 coverage=snap.coverage, qd_score=snap.qd_score,
                                 best_objective=snap.best_objective))
        if progress is not None:
            progress(metrics[-1])

    total = time.perf_counter() - start
    archive.to_csv(os.path.join(cfg.out_dir, "archive.csv"))
    write_metrics_csv(metrics, os.path.join(cfg.out_dir, "metrics.csv"))
    bench = benchmark_design(cfg.benchmark_d_mount)
    bench_cell = archive.cell_index(features_of(bench))
    with open(os.path.join(cfg.out_dir, "heatmap.svg"), "w") as fh:
        fh.write(heatmap_svg(archive, benchmark_cell=bench_cell))
    _write_runlog(cfg, objects, metrics, eval_log, eval_times, total,
                  os.path.join(cfg.out_dir, "runlog.json"))
    return RunResult(archive=archive, metrics=metrics, out_dir=cfg.out_dir,
                     total_wall_time=total)


def write_metrics_csv(metrics, path) -> None:
    with open(path, "w") as fh:
        fh.write("generation,evaluations,coverage,qd_score,best\n")
        for m in metrics:
            fh.write(f"{m.generation},{m.evaluations},{m.coverage!r},"
                     f"{m.qd_score!r},{m.best_objective!r}\n")


def _write_runlog(cfg, objects, metrics, eval_log, eval_times, total, path):
    log = {
        "version": __version__,
        "config": config_to_dict(cfg),
        "objects": [{"id": o.id, "shape": o.shape, "dimensions": o.dimensions,
                     "mass": o.mass} for o in objects],
        "generations": [
            {"generation": m.generation, "evaluations": m.evaluations,
             "coverage": m.coverage, "qd_score": m.qd_score,
             "best": m.best_objective, "wall_time": t}
            for m, t in zip(metrics, eval_times)],
        "evaluations": [
            {"id": eid, "genotype": [float(x) for x in g],
             "objective": obj, "workspace": feats.workspace,
             "volume": feats.volume}
            for eid, g, obj, feats in eval_log],
        "total_wall_time": total,
    }
    with open(path, "w") as fh:
        json.dump(log, fh, indent=1)
        fh.write("\n")


def load_run(run_dir: str):
    """(RunConfig, ObjectSet, ArchiveGrid) reconstructed from a run directory."""
    with open(os.path.join(run_dir, "runlog.json")) as fh:
        log = json.load(fh)
    cfg = config_from_dict(log["config"])
    from .grasp import RigidObjectSpec

    objects = ObjectSet(objects=tuple(
        RigidObjectSpec(id=o["id"], shape=o["shape"],
                        dimensions={k: float(v) for k, v in o["dimensions"].items()},
                        mass=float(o["mass"]))
        for o in log["objects"]))
    archive = ArchiveGrid.from_csv(
        os.path.join(run_dir, "archive.csv"),
        dims=(cfg.archive_rows, cfg.archive_cols),
        workspace_range=WORKSPACE_RANGE, volume_range=volume_range_for())
    return cfg, objects, archive


class ReplayMismatch(Exception):
    """Stored and recomputed objectives differ (determinism violation)."""


class EmptyCell(Exception):
    """Requested archive cell holds no elite."""


def replay_cell(archive_csv_path: str, cell_i: int, cell_j: int):
    """Re-evaluate the elite stored at (cell_i, cell_j) and audit its objective.

    Returns (stored objective, recomputed objective, decoded design).
    Raises :class:`EmptyCell` or :class:`ReplayMismatch`.
    """
    run_dir = os.path.dirname(os.path.abspath(archive_csv_path))
    cfg, objects, archive = load_run(run_dir)
    elite = archive.cells.get((int(cell_i), int(cell_j)))
    if elite is None:
        raise EmptyCell(f"cell ({cell_i}, {cell_j}) is empty")
    design = decode(np.clip(elite.genotype, 0.0, 1.0))
    result = evaluate_design(design, objects, cfg.eval)
    if result.success_rate != elite.objective:
        raise ReplayMismatch(
            f"stored objective {elite.objective!r} != recomputed "
            f"{result.success_rate!r} at cell ({cell_i}, {cell_j})")
    return elite.objective, result.success_rate, design
