"""Command-line interface: optimize, evaluate, mesh, replay, benchmark.

Exit codes: 0 success, 1 runtime/geometry failure, 2 usage or configuration
error, 3 determinism-audit failure. The ``FINRAY_QD_CONFIG`` environment
variable overrides the default config path of ``optimize`` (and nothing
else). No command writes outside its output directory.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunConfig, load_config
from .design import benchmark_design, from_json, validate
from .errors import ConfigError, EmptyObjectSet, FinrayError, GeometryError, MeshError
from .grasp import evaluate_design, write_success_matrix
from .mesh import triangulate
from .outline import finger_outline
from .runner import EmptyCell, ReplayMismatch, replay_cell, resolve_objects, run_optimization

ENV_CONFIG = "FINRAY_QD_CONFIG"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, MeshError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 1
    except FinrayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finray-qd",
        description="Quality-diversity design optimization for fin-ray grippers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run an optimization campaign")
    p_opt.add_argument("config", nargs="?", default=None,
                       help="config file (default: $FINRAY_QD_CONFIG or built-in defaults)")
    p_opt.set_defaults(func=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="evaluate one design on an object set")
    g = p_eval.add_mutually_exclusive_group(required=True)
    g.add_argument("--design", help="design JSON file")
    g.add_argument("--benchmark", action="store_true", help="use the reference design")
    p_eval.add_argument("--objects", default="", help="object-set JSON (default set if omitted)")
    p_eval.add_argument("--out", default=".", help="output directory")
    p_eval.set_defaults(func=cmd_evaluate)

    p_mesh = sub.add_parser("mesh", help="mesh a design's finger cross-sections")
    p_mesh.add_argument("design", help="design JSON file (or 'benchmark')")
    p_mesh.add_argument("--out", default=".", help="output directory")
    p_mesh.add_argument("--h-min", type=float, default=1.0)
    p_mesh.add_argument("--h-max", type=float, default=3.0)
    p_mesh.set_defaults(func=cmd_mesh)

    p_rep = sub.add_parser("replay", help="re-evaluate one archive cell (determinism audit)")
    p_rep.add_argument("archive", help="path to archive.csv inside a run directory")
    p_rep.add_argument("cell_i", type=int)
    p_rep.add_argument("cell_j", type=int)
    p_rep.set_defaults(func=cmd_replay)

    p_bench = sub.add_parser("benchmark", help="alias for evaluate --benchmark")
    p_bench.add_argument("--objects", default="")
    p_bench.add_argument("--out", default=".")
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def cmd_optimize(args) -> int:
    path = args.config or os.environ.get(ENV_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            print(f"config error: no such file: {path}", file=sys.stderr)
            return 2
        cfg = load_config(path)
    else:
        cfg = RunConfig()

    def progress(m):
        print(f"generation {m.generation}: evaluations={m.evaluations} "
              f"coverage={m.coverage:.4f} qd_score={m.qd_score:.4f} "
              f"best={m.best_objective:.4f}")

    result = run_optimization(cfg, progress=progress)
    print(f"run complete: {len(result.archive.cells)} cells filled, "
          f"outputs in {result.out_dir} ({result.total_wall_time:.1f} s)")
    return 0


def _evaluate(design, label: str, objects_path: str, out_dir: str) -> int:
    try:
        cfg = RunConfig(objects=objects_path)
        objects = resolve_objects(cfg)
    except (FileNotFoundError, EmptyObjectSet, ValueError, KeyError) as exc:
        print(f"config error: bad object set: {exc}", file=sys.stderr)
        return 2
    result = evaluate_design(design, objects, cfg.eval)
    print(f"design: {label}")
    for finger_idx, finger in enumerate(design.fingers, start=1):
        print(f"  finger {finger_idx}: H={finger.H} L={finger.L} W={finger.W} "
              f"L_tip={finger.L_tip} t_flex={finger.t_flex} t_back={finger.t_back} "
              f"N={finger.N} t_rib={finger.t_rib} D_angle={finger.D_angle}")
    print(f"  d_mount={design.d_mount}")
    feats = result.features
    print(f"features: workspace={feats.workspace:.3f} mm^2  volume={feats.volume:.3f} mm^3")
    for o in result.outcomes:
        reason = "" if o.failure_reason is None else f"  ({o.failure_reason})"
        print(f"  {o.object_id:<20s} {'1' if o.held else '0'}{reason}")
    print(f"success_rate: {result.success_rate}")
    os.makedirs(out_dir, exist_ok=True)
    write_success_matrix([(label, result)], objects,
                         os.path.join(out_dir, "success_matrix.csv"))
    return 0


def cmd_evaluate(args) -> int:
    if args.benchmark:
        design, label = benchmark_design(), "benchmark"
    else:
        try:
            design = from_json(args.design)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            print(f"config error: bad design file: {exc}", file=sys.stderr)
            return 2
        label = os.path.basename(args.design)
        errors = [v for v in validate(design, strict=False) if v.severity == "error"]
        if errors:
            for v in errors:
                print(f"config error: {v.message}", file=sys.stderr)
            return 2
    return _evaluate(design, label, args.objects, args.out)


def cmd_benchmark(args) -> int:
    return _evaluate(benchmark_design(), "benchmark", args.objects, args.out)


def cmd_mesh(args) -> int:
    if args.design == "benchmark":
        design = benchmark_design()
    else:
        try:
            design = from_json(args.design)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            print(f"config error: bad design file: {exc}", file=sys.stderr)
            return 2
    os.makedirs(args.out, exist_ok=True)
    report = {}
    meshes = {}
    for idx, finger in enumerate(design.fingers, start=1):
        if finger in meshes:
            mesh = meshes[finger]            # identical fingers mesh once
        else:
            mesh = triangulate(finger_outline(finger), args.h_min, args.h_max)
            meshes[finger] = mesh
        path = os.path.join(args.out, f"finger_{idx}.obj")
        mesh.to_obj(path)
        report[f"finger_{idx}"] = mesh.quality_report()
        print(f"finger {idx}: {mesh.n_triangles} triangles, "
              f"min angle {report[f'finger_{idx}']['min_angle_deg']:.1f} deg, "
              f"edges [{report[f'finger_{idx}']['min_edge']:.3f}, "
              f"{report[f'finger_{idx}']['max_edge']:.3f}] mm -> {path}")
    with open(os.path.join(args.out, "mesh_report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return 0


def cmd_replay(args) -> int:
    if not os.path.exists(args.archive):
        print(f"config error: no such file: {args.archive}", file=sys.stderr)
        return 2
    try:
        stored, recomputed, design = replay_cell(args.archive, args.cell_i, args.cell_j)
    except EmptyCell as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ReplayMismatch as exc:
        print(f"determinism violation: {exc}", file=sys.stderr)
        return 3
    print(f"cell ({args.cell_i}, {args.cell_j}): objective {stored!r} reproduced")
    for finger_idx, finger in enumerate(design.fingers, start=1):
        print(f"  finger {finger_idx}: H={finger.H:.3f} L={finger.L:.3f} W={finger.W:.3f} "
              f"L_tip={finger.L_tip:.3f} t_flex={finger.t_flex:.3f} "
              f"t_back={finger.t_back:.3f} N={finger.N} t_rib={finger.t_rib:.3f} "
              f"D_angle={finger.D_angle:.3f}")
    print(f"  d_mount={design.d_mount:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
