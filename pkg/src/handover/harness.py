"""End-to-end pipeline: grasp -> contacts -> ranking -> position ->
orientation -> metrics, plus the ablation ladder and result aggregation.

Modes:
  FULL  contact-aware ranking, planned position, planned orientation
  A1    confidence-only ranking (occlusion ignored), planned position/orientation
  A2    contact-aware ranking, planned position, random feasible orientation
  A3    confidence-only ranking, planned position, random feasible orientation
  A4    confidence-only grasp, no position/orientation planning: the gripper
        keeps a tucked table-grasp posture in front of the robot base
"""
from __future__ import annotations

import enum
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .contacts import ContactMap, cluster_contacts, largest_cluster, load_contact_map, predict_contacts_heuristic
from .delivery import (
    BODY_PROXY_DIMS,
    DeliveryContext,
    HandoverPose,
    exposure_objective,
    feasible,
    plan_handover_orientation,
    sample_orientations,
)
from .ergonomics import HumanModel, plan_handover_position, candidates_csv
from .grasping import GripperModel, rank_grasps, sample_grasps
from .metrics import evaluate_maps, reachability, visibility
from .voxelgeom import VoxelGrid, load_vgrid

A4_FORWARD = 0.6  # tucked gripper: meters in front of the robot base
A4_HEIGHT = 0.8  # meters above the robot base


class AblationMode(enum.Enum):
    FULL = "FULL"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"


CONFIDENCE_ONLY_MODES = (AblationMode.A1, AblationMode.A3, AblationMode.A4)
RANDOM_ORIENTATION_MODES = (AblationMode.A2, AblationMode.A3)


class StageError(RuntimeError):
    """Pipeline failure attributed to a named stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class PipelineParams:
    lam: float = 0.5
    alpha: float = 0.5
    k: float = 0.5
    eps: float | None = None
    min_pts: int = 4
    orientation_step: float = 45.0
    position_step: float = 5.0
    object_mass: float = 0.5
    max_grasps: int = 200
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineParams":
        p = cls()
        for key, value in data.items():
            if not hasattr(p, key):
                raise ValueError(f"unknown parameter {key!r}")
            current = getattr(p, key)
            if key == "eps":
                setattr(p, key, None if value is None else float(value))
            elif isinstance(current, int) and not isinstance(current, bool):
                setattr(p, key, int(value))
            else:
                setattr(p, key, float(value))
        return p

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "alpha": self.alpha,
            "k": self.k,
            "eps": self.eps,
            "min_pts": self.min_pts,
            "orientation_step": self.orientation_step,
            "position_step": self.position_step,
            "object_mass": self.object_mass,
            "max_grasps": self.max_grasps,
            "seed": self.seed,
        }


@dataclass
class Scene:
    name: str
    grid: VoxelGrid
    contact_maps: list[ContactMap]
    planning_map: int | str  # index into contact_maps, or "heuristic"
    human: HumanModel
    gripper: GripperModel
    body_proxy_dims: tuple[float, float, float]
    start_distance: float = 2.0  # receiver stands this far behind the robot start
    standoff: float = 1.2  # robot delivers from this far in front of the receiver
    params: PipelineParams = field(default_factory=PipelineParams)
    # grasp sampling is pure in (grid, seed, count); reruns across modes reuse it
    _grasp_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def robot_base(self) -> np.ndarray:
        """Robot base at delivery time."""
        return self.human.base_position + self.standoff * self.human.facing

    def planning_contact_map(self) -> ContactMap:
        if self.planning_map == "heuristic":
            return predict_contacts_heuristic(self.grid)
        return self.contact_maps[int(self.planning_map)]


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(rel):
        return rel if os.path.isabs(rel) else os.path.join(base, rel)

    try:
        grid = load_vgrid(resolve(cfg["object"]["vgrid"]))
        maps = [load_contact_map(resolve(p), grid) for p in cfg["contact_maps"]]
        human = HumanModel(**cfg.get("human", {}))
        robot = cfg.get("robot", {})
        gripper = GripperModel(**robot.get("gripper", {}))
        proxy = tuple(robot.get("body_proxy_dims", BODY_PROXY_DIMS))
        layout = cfg.get("layout", {})
        params = PipelineParams.from_dict(cfg.get("params", {}))
    except KeyError as exc:
        raise ValueError(f"{path}: missing scene field {exc}") from exc
    if not maps:
        raise ValueError(f"{path}: scene needs at least one contact map")
    planning = cfg.get("planning_map", 0)
    if planning != "heuristic" and not (0 <= int(planning) < len(maps)):
        raise ValueError(f"{path}: planning_map out of range")
    return Scene(
        name=cfg.get("name", os.path.splitext(os.path.basename(path))[0]),
        grid=grid,
        contact_maps=maps,
        planning_map=planning,
        human=human,
        gripper=gripper,
        body_proxy_dims=proxy,
        start_distance=float(layout.get("start_distance", 2.0)),
        standoff=float(layout.get("standoff", 1.2)),
        params=params,
    )


@dataclass
class HandoverReport:
    object_name: str
    mode: str
    seed: int
    params: dict
    stages: list[str]
    grasp: dict | None
    position: dict | None
    delivery: dict | None
    metrics: dict | None
    success: bool
    failure: str | None
    duration_seconds: float

    def to_dict(self) -> dict:
        return {
            "object": self.object_name,
            "mode": self.mode,
            "seed": self.seed,
            "params": self.params,
            "stages": self.stages,
            "grasp": self.grasp,
            "position": self.position,
            "delivery": self.delivery,
            "metrics": self.metrics,
            "success": self.success,
            "failure": self.failure,
            "duration_seconds": self.duration_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HandoverReport":
        return cls(
            object_name=data["object"],
            mode=data["mode"],
            seed=data["seed"],
            params=data["params"],
            stages=data["stages"],
            grasp=data["grasp"],
            position=data["position"],
            delivery=data["delivery"],
            metrics=data["metrics"],
            success=data["success"],
            failure=data["failure"],
            duration_seconds=data["duration_seconds"],
        )


def save_report(report: HandoverReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> HandoverReport:
    with open(path, "r", encoding="utf-8") as fh:
        return HandoverReport.from_dict(json.load(fh))


def _grasp_record(rg) -> dict:
    c = rg.candidate
    return {
        "pose": c.pose.tolist(),
        "width": c.width,
        "confidence": c.confidence,
        "occlusion": rg.occlusion,
        "score": rg.score,
        "contact_pair": [list(c.contact_pair[0]), list(c.contact_pair[1])],
    }


def _delivery_record(pose: HandoverPose, rejected: list | None = None) -> dict:
    rec = {
        "object_rotation": pose.object_rotation.tolist(),
        "object_pose": pose.object_pose.tolist(),
        "gripper_pose": pose.gripper_pose.tolist() if pose.grasp is not None else None,
        "ee_position": pose.ee_position.tolist(),
        "objective": pose.objective,
    }
    if rejected is not None:
        rec["rejected_candidates"] = rejected
    return rec


def run_pipeline(
    scene: Scene,
    mode: AblationMode | str = AblationMode.FULL,
    seed: int | None = None,
    emit_diagnostics: bool = False,
) -> HandoverReport:
    """Execute one handover attempt. Never raises on a stage failure: the
    report carries the failing stage and message instead."""
    mode = AblationMode(mode) if not isinstance(mode, AblationMode) else mode
    params = scene.params
    seed = params.seed if seed is None else int(seed)
    grid = scene.grid
    human = scene.human
    gripper = scene.gripper
    t_start = time.perf_counter()
    stages: list[str] = []
    grasp_rec = position_rec = delivery_rec = metrics_rec = None
    failure = None
    ok = False
    try:
        stage = "grasp"
        stages.append(stage)
        normals = grid.normals
        cache_key = (seed, params.max_grasps)
        candidates = scene._grasp_cache.get(cache_key)
        if candidates is None:
            candidates = sample_grasps(grid, normals, gripper, params.max_grasps, seed)
            scene._grasp_cache[cache_key] = candidates
        if not candidates:
            raise StageError(stage, "no grasp candidates")

        stage = "contacts"
        stages.append(stage)
        planning_cm = scene.planning_contact_map()
        clusters = cluster_contacts(planning_cm, params.eps, params.min_pts)
        if not clusters:
            raise StageError(stage, "empty contact map")
        cluster = largest_cluster(clusters)

        stage = "ranking"
        stages.append(stage)
        lam = 1.0 if mode in CONFIDENCE_ONLY_MODES else params.lam
        ranked = rank_grasps(candidates, cluster, lam, normals, gripper, grid)
        top = ranked[0]
        grasp_rec = _grasp_record(top)

        robot_base = scene.robot_base
        diag = {}

        if mode is AblationMode.A4:
            # tucked pose: grasp orientation kept, held point parked in front
            # of the base; position/orientation planners intentionally skipped
            stage = "metrics"
            forward = -human.facing  # robot faces the receiver
            ee = robot_base + A4_FORWARD * forward + np.array([0.0, 0.0, A4_HEIGHT])
            rotation = np.eye(3)
            ctx = DeliveryContext(
                grid=grid,
                gripper=gripper,
                grasp_rotation=top.candidate.rotation,
                held_point=top.candidate.translation,
                width=top.candidate.width,
                ee_position=ee,
                human=human,
                robot_base=robot_base,
                body_proxy_dims=scene.body_proxy_dims,
            )
            pose = HandoverPose(
                top, rotation, ee, exposure_objective(ctx, rotation, cluster),
                top.candidate.translation,
            )
            delivery_rec = _delivery_record(pose)
        else:
            stage = "position"
            stages.append(stage)
            ee, winner, kept = plan_handover_position(
                human, params.object_mass, params.alpha, params.position_step
            )
            position_rec = {
                "hand_position": ee.tolist(),
                "shoulder_deg": winner.config.shoulder_deg,
                "elbow_deg": winner.config.elbow_deg,
                "effort_cost": winner.effort_cost,
                "displacement_cost": winner.displacement_cost,
                "total_cost": winner.total_cost,
            }
            if emit_diagnostics:
                diag["ergonomics_csv"] = candidates_csv(kept)

            stage = "orientation"
            stages.append(stage)
            ctx = DeliveryContext(
                grid=grid,
                gripper=gripper,
                grasp_rotation=top.candidate.rotation,
                held_point=top.candidate.translation,
                width=top.candidate.width,
                ee_position=ee,
                human=human,
                robot_base=robot_base,
                body_proxy_dims=scene.body_proxy_dims,
            )
            if mode in RANDOM_ORIENTATION_MODES:
                rotations = sample_orientations(params.orientation_step)
                feas = [r for r in rotations if feasible(ctx, r)]
                if not feas:
                    raise StageError(stage, "no feasible handover orientation")
                rng = np.random.default_rng([seed, 7])
                rotation = feas[int(rng.integers(len(feas)))]
                pose = HandoverPose(
                    top, rotation, ee, exposure_objective(ctx, rotation, cluster),
                    top.candidate.translation,
                )
                delivery_rec = _delivery_record(pose)
            else:
                pose = plan_handover_orientation(ctx, cluster, params.orientation_step, top)
                rejected = None
                if emit_diagnostics:
                    rejected = [
                        {"rotation": c.rotation.tolist(), "reason": c.reason}
                        for c in pose.candidates
                        if not c.feasible
                    ]
                delivery_rec = _delivery_record(pose, rejected)
            rotation = pose.object_rotation
            stage = "metrics"

        stages.append("metrics")
        scores = evaluate_maps(ctx, rotation, scene.contact_maps, params.k)
        metrics_rec = {
            "per_map": [
                {"visibility": v, "reachability": r}
                for v, r in zip(scores.visibility, scores.reachability)
            ],
            "visibility_median": scores.visibility_median,
            "reachability_median": scores.reachability_median,
            "k": params.k,
        }
        if emit_diagnostics:
            vis_detail = [
                visibility(ctx, rotation, cm, detail=True)[1] for cm in scene.contact_maps
            ]
            reach_detail = [
                reachability(ctx, rotation, cm, detail=True)[1] for cm in scene.contact_maps
            ]
            metrics_rec["visibility_bitmaps"] = [
                {",".join(map(str, k)): v for k, v in d.items()} for d in vis_detail
            ]
            metrics_rec["reachability_bitmaps"] = [
                {",".join(map(str, k)): v for k, v in d.items()} for d in reach_detail
            ]
        if emit_diagnostics and diag:
            metrics_rec["diagnostics"] = diag
        ok = scores.success
    except (StageError, ValueError) as exc:
        if isinstance(exc, StageError):
            failure = str(exc)
        else:
            failure = f"{stage}: {exc}"
    duration = time.perf_counter() - t_start
    return HandoverReport(
        object_name=scene.name,
        mode=mode.value,
        seed=seed,
        params={**params.to_dict(), "seed": seed},
        stages=stages,
        grasp=grasp_rec,
        position=position_rec,
        delivery=delivery_rec,
        metrics=metrics_rec,
        success=ok,
        failure=failure,
        duration_seconds=duration,
    )


# -- aggregation ----------------------------------------------------------------


def aggregate(reports) -> dict:
    """Fold per-run reports into per-mode rows (Table-style summary).

    Failed runs count: success=false in the rate, 0.0 toward the metric
    means. Mixing different k or lam settings inside one mode group is an
    error.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    by_mode: dict[str, list[HandoverReport]] = {}
    for rep in reports:
        by_mode.setdefault(rep.mode, []).append(rep)
    modes_order = [m.value for m in AblationMode if m.value in by_mode]
    summary = {"modes": {}, "runs": []}
    for mode in modes_order:
        group = by_mode[mode]
        ks = {rep.params.get("k") for rep in group}
        lams = {rep.params.get("lam") for rep in group}
        if len(ks) > 1 or len(lams) > 1:
            raise ValueError(f"mode {mode}: mixed k or lam across aggregated reports")
        vis = [rep.metrics["visibility_median"] if rep.metrics else 0.0 for rep in group]
        reach = [rep.metrics["reachability_median"] if rep.metrics else 0.0 for rep in group]
        succ = [1.0 if rep.success else 0.0 for rep in group]
        by_object: dict[str, list[float]] = {}
        for rep in group:
            by_object.setdefault(rep.object_name, []).append(1.0 if rep.success else 0.0)
        summary["modes"][mode] = {
            "visibility_mean": float(np.mean(vis)),
            "reachability_mean": float(np.mean(reach)),
            "success_rate": float(np.mean(succ)),
            "success_rate_by_object": {
                name: float(np.mean(vals)) for name, vals in sorted(by_object.items())
            },
            "n_runs": len(group),
        }
    for rep in sorted(reports, key=lambda r: (r.object_name, r.mode, r.seed)):
        summary["runs"].append(
            {
                "object": rep.object_name,
                "mode": rep.mode,
                "seed": rep.seed,
                "visibility_median": rep.metrics["visibility_median"] if rep.metrics else 0.0,
                "reachability_median": rep.metrics["reachability_median"] if rep.metrics else 0.0,
                "success": rep.success,
                "failure": rep.failure,
            }
        )
    return summary


def summary_csv(summary: dict) -> str:
    lines = ["Mode,Visibility,Reachability,SuccessRate"]
    for mode in (m.value for m in AblationMode):
        if mode not in summary["modes"]:
            continue
        row = summary["modes"][mode]
        lines.append(
            f"{mode},{row['visibility_mean']:.6f},{row['reachability_mean']:.6f},"
            f"{row['success_rate']:.6f}"
        )
    return "\n".join(lines) + "\n"
