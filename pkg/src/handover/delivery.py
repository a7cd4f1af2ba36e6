"""Final-pose selection: re-orient the grasped object about the held point so
its contact region faces the receiver, subject to safety constraints.

Candidate rotations are deltas applied to the grasp-time pose (identity =
keep it). They are parameterized by pointing a canonical axis at each
(azimuth, elevation) node of a spherical grid, then rolling about it; the
(0, 0, 0) node contributes the identity, so it is always in the set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .contacts import ContactCluster
from .ergonomics import HumanModel
from .grasping import GraspCandidate, GripperModel, RankedGrasp
from .voxelgeom import VoxelGrid

DEFAULT_STEP_DEG = 45.0
DEDUP_TOL = 1e-9
OBJECTIVE_TIE_TOL = 1e-9  # objectives this close are tie-broken by rotation angle
MIN_OBJECT_HEIGHT = 0.40
BODY_CAPSULE_RADIUS = 0.20
APPROACH_CONE_DEG = 120.0
BODY_PROXY_DIMS = (0.5, 0.5, 1.1)  # robot stand-in box: footprint x, y, height


def _rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _direction_frame(az_deg: float, el_deg: float) -> np.ndarray:
    """Rotation taking +x to the (azimuth, elevation) direction, +y to the
    azimuth tangent and +z to the elevation tangent. Identity at (0, 0)."""
    az, el = math.radians(az_deg), math.radians(el_deg)
    ca, sa, ce, se = math.cos(az), math.sin(az), math.cos(el), math.sin(el)
    d = np.array([ce * ca, ce * sa, se])
    v = np.array([-sa, ca, 0.0])
    u = np.array([-se * ca, -se * sa, ce])
    return np.column_stack([d, v, u])


def rotation_angle_deg(rotation: np.ndarray) -> float:
    """Geodesic distance from the identity, in degrees."""
    t = (float(np.trace(rotation)) - 1.0) / 2.0
    return math.degrees(math.acos(min(max(t, -1.0), 1.0)))


@lru_cache(maxsize=8)
def _sample_orientations_cached(step: float):
    if step <= 0 or 360.0 % step != 0.0:
        raise ValueError("step must be positive and divide 360")
    azimuths = [k * step for k in range(int(360.0 // step))]
    n_el = int(math.floor(90.0 / step + 1e-9))
    elevations = [k * step for k in range(-n_el, n_el + 1)]
    rolls = azimuths
    mats: list[np.ndarray] = []
    for az in azimuths:
        for el in elevations:
            for roll in rolls:
                r = _direction_frame(az, el) @ _rot_x(roll)
                if any(np.abs(r - m).max() <= DEDUP_TOL for m in mats):
                    continue
                mats.append(r)
    for m in mats:
        m.setflags(write=False)
    return tuple(mats)


def sample_orientations(step: float = DEFAULT_STEP_DEG) -> list[np.ndarray]:
    """Spherical direction grid x roll grid, duplicates removed (the grid
    degenerates at the poles). Order follows the (azimuth, elevation, roll)
    enumeration and always contains the identity."""
    return list(_sample_orientations_cached(float(step)))


@dataclass
class DeliveryContext:
    """Everything feasibility and metric checks need about the final scene:
    the grasped object, where it is held, and who stands where."""

    grid: VoxelGrid
    gripper: GripperModel
    grasp_rotation: np.ndarray  # gripper world rotation at grasp time
    held_point: np.ndarray  # grasp midpoint in grid/world coordinates
    width: float
    ee_position: np.ndarray  # where the held point sits at delivery
    human: HumanModel
    robot_base: np.ndarray
    body_proxy_dims: tuple[float, float, float] | None = BODY_PROXY_DIMS
    min_object_height: float = MIN_OBJECT_HEIGHT
    capsule_radius: float = BODY_CAPSULE_RADIUS
    approach_cone_deg: float = APPROACH_CONE_DEG

    def __post_init__(self):
        self.grasp_rotation = np.asarray(self.grasp_rotation, dtype=float).reshape(3, 3)
        self.held_point = np.asarray(self.held_point, dtype=float).reshape(3)
        self.ee_position = np.asarray(self.ee_position, dtype=float).reshape(3)
        self.robot_base = np.asarray(self.robot_base, dtype=float).reshape(3)

    @cached_property
    def object_offsets(self) -> np.ndarray:
        """Occupied voxel centers relative to the held point."""
        return self.grid.occupied_centers - self.held_point

    @cached_property
    def gripper_offsets(self) -> np.ndarray:
        """Gripper surface samples (pitch = voxel size) in world frame at
        grasp time, relative to the held point."""
        local = self.gripper.surface_points(self.width, self.grid.voxel_size)
        return local @ self.grasp_rotation.T

    def object_points(self, rotation: np.ndarray) -> np.ndarray:
        return self.ee_position + self.object_offsets @ rotation.T

    def gripper_points(self, rotation: np.ndarray) -> np.ndarray:
        return self.ee_position + self.gripper_offsets @ rotation.T

    def gripper_pose(self, rotation: np.ndarray):
        return rotation @ self.grasp_rotation, self.ee_position

    def approach_axis(self, rotation: np.ndarray) -> np.ndarray:
        return rotation @ (-self.grasp_rotation[:, 2])

    @property
    def robot_to_human(self) -> np.ndarray:
        d = self.human.base_position - self.robot_base
        d = np.array([d[0], d[1], 0.0])
        n = float(np.linalg.norm(d))
        if n < 1e-9:
            raise ValueError("robot and human bases coincide")
        return d / n

    def grid_frame_point(self, rotation: np.ndarray, world_point) -> np.ndarray:
        """Map a world point into grid coordinates at the delivered pose."""
        return self.held_point + rotation.T @ (np.asarray(world_point, dtype=float) - self.ee_position)


@dataclass
class OrientationCandidate:
    rotation: np.ndarray
    feasible: bool
    objective: float | None
    reason: str | None  # set when infeasible
    source: tuple[float, float, float] | None = None  # (az, el, roll) if known


@dataclass
class HandoverPose:
    grasp: RankedGrasp | None
    object_rotation: np.ndarray  # delta about the held point
    ee_position: np.ndarray
    objective: float
    held_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    candidates: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.object_rotation = np.asarray(self.object_rotation, dtype=float).reshape(3, 3)
        self.ee_position = np.asarray(self.ee_position, dtype=float).reshape(3)
        self.held_point = np.asarray(self.held_point, dtype=float).reshape(3)

    @property
    def object_pose(self) -> np.ndarray:
        """4x4 world-from-grid transform of the delivered object."""
        m = np.eye(4)
        m[:3, :3] = self.object_rotation
        m[:3, 3] = self.ee_position - self.object_rotation @ self.held_point
        return m

    @property
    def gripper_pose(self) -> np.ndarray:
        """4x4 world pose of the gripper at delivery (requires a grasp)."""
        if self.grasp is None:
            raise ValueError("pose carries no grasp")
        m = np.eye(4)
        m[:3, :3] = self.object_rotation @ self.grasp.candidate.rotation
        m[:3, 3] = self.ee_position
        return m


def _capsule_hit(points: np.ndarray, base: np.ndarray, height: float, radius: float) -> bool:
    """Any point within `radius` of the vertical segment base..base+height?"""
    rel = points - base
    z = np.clip(rel[:, 2], 0.0, height)
    d2 = rel[:, 0] ** 2 + rel[:, 1] ** 2 + (rel[:, 2] - z) ** 2
    return bool((d2 < radius * radius).any())


def feasibility_reason(ctx: DeliveryContext, rotation: np.ndarray) -> str | None:
    """None when the rotation is deliverable, else a short reason label."""
    obj_pts = ctx.object_points(rotation)
    if float(obj_pts[:, 2].min()) < ctx.min_object_height:
        return "object below clearance height"
    base = ctx.human.base_position
    if _capsule_hit(obj_pts, base, ctx.human.height, ctx.capsule_radius):
        return "object penetrates receiver"
    if _capsule_hit(ctx.gripper_points(rotation), base, ctx.human.height, ctx.capsule_radius):
        return "gripper penetrates receiver"
    approach = ctx.approach_axis(rotation)
    cos_angle = float(np.dot(approach, ctx.robot_to_human))
    if math.degrees(math.acos(min(max(cos_angle, -1.0), 1.0))) > ctx.approach_cone_deg:
        return "approach axis outside delivery cone"
    return None


def feasible(ctx: DeliveryContext, rotation: np.ndarray) -> bool:
    return feasibility_reason(ctx, rotation) is None


def exposure_objective(ctx: DeliveryContext, rotation: np.ndarray, cluster: ContactCluster) -> float:
    """Sum of contact-voxel distances to the receiver's eye at the delivered
    pose. Lower is better: the contact region swings toward the viewer."""
    rel = ctx.grid.centers(np.asarray(cluster.member_indices, dtype=float)) - ctx.held_point
    pts = ctx.ee_position + rel @ rotation.T
    eye = ctx.human.eye_point
    return float(np.linalg.norm(pts - eye, axis=1).sum())


def plan_handover_orientation(
    ctx: DeliveryContext,
    cluster: ContactCluster,
    step: float = DEFAULT_STEP_DEG,
    grasp: RankedGrasp | None = None,
) -> HandoverPose:
    """Exhaustive search over the sampled rotation set.

    Minimizes the contact-to-eye exposure objective over feasible rotations.
    Objectives within 1e-9 of each other count as tied; ties break by the
    smaller geodesic angle from identity, then by sample order.
    """
    if cluster.size == 0:
        raise ValueError("empty contact map")
    rotations = sample_orientations(step)
    candidates: list[OrientationCandidate] = []
    best = None  # (quantized objective, angle, index)
    best_raw = None
    for k, rot in enumerate(rotations):
        reason = feasibility_reason(ctx, rot)
        if reason is not None:
            candidates.append(OrientationCandidate(rot, False, None, reason))
            continue
        obj = exposure_objective(ctx, rot, cluster)
        candidates.append(OrientationCandidate(rot, True, obj, None))
        key = (round(obj / OBJECTIVE_TIE_TOL), rotation_angle_deg(rot), k)
        if best is None or key < best:
            best = key
            best_raw = (rot, obj)
    if best_raw is None:
        raise ValueError("no feasible handover orientation")
    rot, obj = best_raw
    return HandoverPose(grasp, rot, ctx.ee_position.copy(), obj, ctx.held_point.copy(), candidates)
