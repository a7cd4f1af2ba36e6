"""Command line front end.

Exit codes: 0 success, 1 usage or runtime error, 2 pipeline stage failure.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import glob
import json
import os
import sys

from . import harness, suite
from .harness import AblationMode, HandoverReport, aggregate, load_scene, run_pipeline, save_report, summary_csv
from .voxelgeom import load_obj, save_vgrid, voxelize_mesh


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _apply_overrides(scene, pairs):
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not key=value")
        key, _, raw = pair.partition("=")
        key = key.strip()
        raw = raw.strip()
        value = None if raw.lower() in ("none", "null") else raw
        scene.params = harness.PipelineParams.from_dict(
            {**scene.params.to_dict(), key: value}
        )
    return scene


def _cmd_voxelize(args) -> int:
    mesh = load_obj(args.mesh)
    grid = voxelize_mesh(mesh, dims=(args.dims,) * 3, padding=args.padding)
    save_vgrid(grid, args.out)
    print(f"voxelized {args.mesh}: {grid.occupied_count} occupied of {args.dims}^3 -> {args.out}")
    return 0


def _cmd_plan(args) -> int:
    scene = load_scene(args.scene)
    _apply_overrides(scene, args.set or [])
    report = run_pipeline(scene, args.mode, args.seed, emit_diagnostics=args.emit_diagnostics)
    if args.out:
        save_report(report, args.out)
    if report.failure is not None:
        print(f"mode={report.mode} seed={report.seed} failure={report.failure}")
        return 2
    vis = report.metrics["visibility_median"]
    reach = report.metrics["reachability_median"]
    print(
        f"mode={report.mode} seed={report.seed} vis={vis:.6f} reach={reach:.6f} "
        f"success={str(report.success).lower()}"
    )
    return 0


def _run_one(job):
    scene, mode, seed, emit = job
    return run_pipeline(scene, mode, seed, emit_diagnostics=emit)


def _cmd_bench(args) -> int:
    scene_paths = sorted(p for pattern in args.scenes for p in glob.glob(pattern))
    if not scene_paths:
        print("no scenes matched", file=sys.stderr)
        return 1
    modes = [AblationMode(m) for m in (args.modes.split(",") if args.modes else
                                       [m.value for m in AblationMode])]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(range(5))
    scenes = [load_scene(path) for path in scene_paths]
    jobs = [
        (scene, mode, seed, args.emit_diagnostics)
        for scene in scenes
        for mode in modes
        for seed in seeds
    ]
    names = [
        (path, mode, seed)
        for path in scene_paths
        for mode in modes
        for seed in seeds
    ]
    if args.jobs and args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(job) for job in jobs]
    os.makedirs(args.out, exist_ok=True)
    for (path, mode, seed), report in zip(names, reports):
        stem = os.path.splitext(os.path.basename(path))[0]
        if stem.endswith(".scene"):
            stem = stem[: -len(".scene")]
        save_report(report, os.path.join(args.out, f"{stem}_{mode.value}_{seed}.json"))
    summary = aggregate(reports)
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    csv_text = summary_csv(summary)
    with open(os.path.join(args.out, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    print(csv_text, end="")
    return 0


def _cmd_suite(args) -> int:
    paths = suite.write_suite(args.out, args.objects.split(",") if args.objects else None)
    for path in paths:
        print(path)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="handover", description="Handover planning and evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_vox = sub.add_parser("voxelize", help="voxelize an OBJ mesh into a .vgrid file")
    p_vox.add_argument("mesh")
    p_vox.add_argument("out")
    p_vox.add_argument("--dims", type=int, default=64)
    p_vox.add_argument("--padding", type=float, default=0.05)
    p_vox.set_defaults(func=_cmd_voxelize)

    p_plan = sub.add_parser("plan", help="run the pipeline once on a scene")
    p_plan.add_argument("scene")
    p_plan.add_argument("--mode", default="FULL", choices=[m.value for m in AblationMode])
    p_plan.add_argument("--seed", type=int, default=None)
    p_plan.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a scene parameter (repeatable)")
    p_plan.add_argument("--out", help="write the run report JSON here")
    p_plan.add_argument("--emit-diagnostics", action="store_true")
    p_plan.set_defaults(func=_cmd_plan)

    p_bench = sub.add_parser("bench", help="run the mode x seed grid over many scenes")
    p_bench.add_argument("scenes", nargs="+", help="scene JSON paths or globs")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--modes", help="comma separated subset, default all")
    p_bench.add_argument("--seeds", help="comma separated seeds, default 0-4")
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--emit-diagnostics", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)

    p_suite = sub.add_parser("suite", help="write the bundled benchmark objects and scenes")
    p_suite.add_argument("out", help="output directory")
    p_suite.add_argument("--objects", help="comma separated subset of bundled names")
    p_suite.set_defaults(func=_cmd_suite)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
