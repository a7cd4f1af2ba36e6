"""Receiver-centric evaluation of a delivered pose: can the contact region be
seen, can it be reached, and does the handover count as successful."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contacts import ContactMap
from .delivery import DeliveryContext
from .voxelgeom import Ray, ray_cast

AIM_OFFSET_VOXELS = 1.5  # sight lines aim this far off the contact face


@dataclass
class MetricScores:
    visibility: list[float]
    reachability: list[float]
    visibility_median: float
    reachability_median: float
    threshold: float
    success: bool


def lower_median(values) -> float:
    """Median that never interpolates: for even counts, the lower middle."""
    if not values:
        raise ValueError("median of empty list")
    ordered = sorted(values)
    return float(ordered[(len(ordered) - 1) // 2])


def success(visibility_scores, reachability_scores, threshold: float = 0.5) -> bool:
    """Handover succeeds iff both lower medians strictly exceed the threshold."""
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    return (
        lower_median(visibility_scores) > threshold
        and lower_median(reachability_scores) > threshold
    )


def _segment_hits_box(origin, target_dist, direction, lo, hi) -> bool:
    """Does the segment origin + t*direction, t in (0, target_dist), pass
    through the AABB?"""
    t0, t1 = 0.0, target_dist
    for a in range(3):
        d = direction[a]
        if d == 0.0:
            if origin[a] < lo[a] or origin[a] > hi[a]:
                return False
            continue
        ta = (lo[a] - origin[a]) / d
        tb = (hi[a] - origin[a]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return t0 < target_dist


def _robot_proxy_box(ctx: DeliveryContext):
    if ctx.body_proxy_dims is None:
        return None
    fx, fy, h = ctx.body_proxy_dims
    base = ctx.robot_base
    lo = np.array([base[0] - fx / 2, base[1] - fy / 2, base[2]])
    hi = np.array([base[0] + fx / 2, base[1] + fy / 2, base[2] + h])
    return lo, hi


def visibility(
    ctx: DeliveryContext,
    rotation: np.ndarray,
    cm: ContactMap,
    include_gripper: bool = True,
    include_robot: bool = True,
    detail: bool = False,
):
    """Weighted fraction of the contact map the receiver's eye can see.

    Sight lines aim at a point floated 1.5 voxel edges off the contact face
    along its outward normal; aiming at the buried voxel center would make
    grazing rays clip the surface early. A contact voxel is visible when the
    segment from the eye to its aim point crosses no object voxel, no gripper
    box, and no robot body proxy, and the voxel center is not covered by the
    closing region.
    """
    grid = ctx.grid
    contact = cm.contact_indices()
    denom = sum(cm.values[i] for i in contact)
    if denom <= 0:
        raise ValueError("empty contact map")
    vs = grid.voxel_size
    eye = ctx.human.eye_point
    grip_rot, grip_t = ctx.gripper_pose(rotation)
    proxy = _robot_proxy_box(ctx) if include_robot else None
    normals = grid.normals
    # eye mapped into grid coordinates once; the grid never moves, the world does
    eye_grid = ctx.grid_frame_point(rotation, eye)
    numer = 0.0
    flags: dict = {}
    for idx in contact:
        c_grid = grid.center(idx)
        world = ctx.ee_position + rotation @ (c_grid - ctx.held_point)
        normal = normals.get(idx)
        if normal is None:
            off = eye_grid - c_grid
            n = float(np.linalg.norm(off))
            normal = off / n if n > 0 else np.array([0.0, 0.0, 1.0])
        aim_grid = c_grid + AIM_OFFSET_VOXELS * vs * normal
        to_aim = aim_grid - eye_grid
        dist = float(np.linalg.norm(to_aim))
        visible = True
        if dist > 0:
            if include_gripper:
                if bool(ctx.gripper.in_closing_region(grip_rot, grip_t, ctx.width, world)[0]):
                    visible = False
                else:
                    world_aim = ctx.ee_position + rotation @ (aim_grid - ctx.held_point)
                    direction = (world_aim - eye) / dist
                    if ctx.gripper.ray_blocked(grip_rot, grip_t, ctx.width, eye, direction, dist):
                        visible = False
            if visible and proxy is not None:
                world_aim = ctx.ee_position + rotation @ (aim_grid - ctx.held_point)
                direction = (world_aim - eye) / dist
                if _segment_hits_box(eye, dist, direction, proxy[0], proxy[1]):
                    visible = False
            if visible:
                hit = ray_cast(grid, Ray(eye_grid, to_aim / dist, dist))
                visible = hit is None
        if visible:
            numer += cm.values[idx]
        flags[idx] = visible
    score = numer / denom
    return (score, flags) if detail else score


def reachability(
    ctx: DeliveryContext,
    rotation: np.ndarray,
    cm: ContactMap,
    detail: bool = False,
):
    """Weighted fraction of the contact map inside the receiver's grasp
    envelope: within arm's length of the shoulder AND horizontally closer to
    the body axis than any part of the gripper."""
    grid = ctx.grid
    contact = cm.contact_indices()
    denom = sum(cm.values[i] for i in contact)
    if denom <= 0:
        raise ValueError("empty contact map")
    human = ctx.human
    shoulder = human.shoulder_point
    base = human.base_position
    grip_pts = ctx.gripper_points(rotation)
    gripper_axis_dist = float(
        np.hypot(grip_pts[:, 0] - base[0], grip_pts[:, 1] - base[1]).min()
    )
    numer = 0.0
    flags: dict = {}
    for idx in contact:
        world = ctx.ee_position + rotation @ (grid.center(idx) - ctx.held_point)
        d1 = float(np.linalg.norm(world - shoulder))
        d2 = float(np.hypot(world[0] - base[0], world[1] - base[1]))
        ok = d1 < human.arm_length and d2 < gripper_axis_dist
        if ok:
            numer += cm.values[idx]
        flags[idx] = ok
    score = numer / denom
    return (score, flags) if detail else score


def evaluate_maps(ctx: DeliveryContext, rotation: np.ndarray, maps, threshold: float = 0.5):
    """Score every ground-truth map at the delivered pose and fold the lists
    into the success verdict."""
    vis = [visibility(ctx, rotation, cm) for cm in maps]
    reach = [reachability(ctx, rotation, cm) for cm in maps]
    return MetricScores(
        visibility=vis,
        reachability=reach,
        visibility_median=lower_median(vis),
        reachability_median=lower_median(reach),
        threshold=threshold,
        success=success(vis, reach, threshold),
    )
