"""Visibility/reachability scoring and the success rule."""
import math

import numpy as np
import pytest

from handover.contacts import ContactMap
from handover.delivery import DeliveryContext
from handover.ergonomics import HumanModel
from handover.grasping import GripperModel
from handover.metrics import (
    evaluate_maps,
    lower_median,
    reachability,
    success,
    visibility,
)

from conftest import box_grid

I3 = np.eye(3)


def rot_y(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


# ----------------------------------------------------------- median, success

def test_lower_median_odd():
    assert lower_median([3.0, 1.0, 2.0]) == 2.0


def test_lower_median_even_takes_lower_middle():
    assert lower_median([4.0, 1.0, 3.0, 2.0]) == 2.0
    assert lower_median([1.0, 1.0]) == 1.0


def test_lower_median_single_and_empty():
    assert lower_median([7.0]) == 7.0
    with pytest.raises(ValueError, match="empty"):
        lower_median([])


def test_success_requires_both_medians_strictly_above():
    assert success([0.7], [0.9]) is True
    assert success([0.6], [0.4]) is False
    assert success([0.5], [0.9]) is False  # equality does not count
    assert success([0.9], [0.5]) is False
    assert success([0.4, 0.6, 0.8], [0.9, 0.7, 0.8]) is True


def test_success_threshold_validated():
    with pytest.raises(ValueError, match="threshold"):
        success([0.9], [0.9], threshold=1.0)
    with pytest.raises(ValueError, match="threshold"):
        success([0.9], [0.9], threshold=0.0)


# ------------------------------------------------------------ slab fixture

# 3-voxel-thick slab in front of and below the receiver's eye. Contacts on
# the eye-side face (x index 2) are in clear view; the far face (x index 4)
# hides behind the slab itself.
NEAR = [(2, y, z) for y in (4, 5, 6) for z in (4, 5, 6)]
FAR = [(4, y, z) for y in (4, 5, 6) for z in (4, 5, 6)]


def slab_ctx(origin=(0.55, -0.06, 1.14), held_idx=(3, 5, 5), grasp_rotation=None):
    grid = box_grid((7, 12, 12), (2, 2, 2), (4, 9, 9), voxel_size=0.01, origin=origin)
    held = grid.centers(np.array([held_idx], dtype=float))[0]
    ctx = DeliveryContext(
        grid=grid,
        gripper=GripperModel(),
        grasp_rotation=I3 if grasp_rotation is None else grasp_rotation,
        held_point=held,
        width=0.03,
        ee_position=held.copy(),
        human=HumanModel(),
        robot_base=np.array([1.2, 0.0, 0.0]),
    )
    return grid, ctx


def ones_map(grid, indices):
    return ContactMap(grid, {i: 1.0 for i in indices})


# ---------------------------------------------------------------- visibility

def test_eye_facing_face_fully_visible():
    grid, ctx = slab_ctx()
    cm = ones_map(grid, NEAR)
    assert visibility(ctx, I3, cm, include_gripper=False, include_robot=False) == 1.0


def test_face_behind_slab_invisible():
    grid, ctx = slab_ctx()
    cm = ones_map(grid, FAR)
    assert visibility(ctx, I3, cm, include_gripper=False, include_robot=False) == 0.0


def test_visibility_weights_mixed_faces():
    grid, ctx = slab_ctx()
    cm = ContactMap(
        grid,
        {**{i: 0.9 for i in NEAR}, **{i: 0.3 for i in FAR}},
        threshold=0.25,
    )
    got = visibility(ctx, I3, cm, include_gripper=False, include_robot=False)
    assert got == pytest.approx((9 * 0.9) / (9 * 0.9 + 9 * 0.3), abs=1e-12)


def test_visibility_detail_flags_consistent():
    grid, ctx = slab_ctx()
    cm = ones_map(grid, NEAR + FAR)
    score, flags = visibility(ctx, I3, cm, include_gripper=False,
                              include_robot=False, detail=True)
    assert set(flags) == set(cm.contact_indices())
    assert score == pytest.approx(sum(flags.values()) / len(flags))
    assert all(flags[i] for i in NEAR)
    assert not any(flags[i] for i in FAR)


def test_closing_region_hides_held_contacts():
    # held point on the visible face: the whole face sits inside the closing
    # region (offsets within finger thickness/width/length), while the
    # gripper boxes themselves never cross the sight lines
    grid, ctx = slab_ctx(held_idx=(2, 5, 5))
    cm = ones_map(grid, NEAR)
    assert visibility(ctx, I3, cm, include_gripper=False, include_robot=False) == 1.0
    assert visibility(ctx, I3, cm, include_gripper=True, include_robot=False) == 0.0


def test_palm_toward_eye_blocks_sight_lines():
    # rotating the approach axis toward the receiver parks the palm slab
    # between eye and contacts
    grid, ctx = slab_ctx(grasp_rotation=rot_y(-90.0))
    cm = ones_map(grid, NEAR)
    clear = visibility(ctx, I3, cm, include_gripper=False, include_robot=False)
    blocked = visibility(ctx, I3, cm, include_gripper=True, include_robot=False)
    assert clear == 1.0
    assert blocked < clear


def test_robot_proxy_blocks_sight_lines():
    grid, ctx = slab_ctx()
    ctx.robot_base = np.array([0.3, 0.0, 0.0])
    ctx.body_proxy_dims = (0.5, 0.5, 1.55)
    cm = ones_map(grid, NEAR)
    assert visibility(ctx, I3, cm, include_gripper=False, include_robot=False) == 1.0
    assert visibility(ctx, I3, cm, include_gripper=False, include_robot=True) == 0.0


def test_empty_contact_map_rejected():
    grid, ctx = slab_ctx()
    weak = ContactMap(grid, {NEAR[0]: 0.1}, threshold=0.5)
    with pytest.raises(ValueError, match="empty contact map"):
        visibility(ctx, I3, weak)
    with pytest.raises(ValueError, match="empty contact map"):
        reachability(ctx, I3, weak)


# -------------------------------------------------------------- reachability

def test_near_face_reachable():
    grid, ctx = slab_ctx()
    assert reachability(ctx, I3, ones_map(grid, NEAR)) == 1.0


def test_far_face_shadowed_by_gripper():
    # far-face contacts sit farther from the body axis than the gripper does
    grid, ctx = slab_ctx()
    assert reachability(ctx, I3, ones_map(grid, FAR)) == 0.0


def test_mixed_faces_split_score():
    grid, ctx = slab_ctx()
    assert reachability(ctx, I3, ones_map(grid, NEAR + FAR)) == pytest.approx(0.5)


def test_out_of_reach_scene_scores_zero():
    grid, ctx = slab_ctx(origin=(1.95, -0.06, 1.14))
    assert reachability(ctx, I3, ones_map(grid, NEAR + FAR)) == 0.0


def test_reachability_flags_match_per_point_rule():
    grid, ctx = slab_ctx()
    cm = ones_map(grid, NEAR + FAR)
    score, flags = reachability(ctx, I3, cm, detail=True)
    human = ctx.human
    grip_pts = ctx.gripper_points(I3)
    grip_d = min(math.hypot(p[0] - human.base_position[0], p[1] - human.base_position[1])
                 for p in grip_pts)
    for idx in cm.contact_indices():
        world = ctx.ee_position + I3 @ (grid.center(idx) - ctx.held_point)
        d1 = float(np.linalg.norm(world - human.shoulder_point))
        d2 = math.hypot(world[0] - human.base_position[0], world[1] - human.base_position[1])
        assert flags[idx] == (d1 < human.arm_length and d2 < grip_d)
    assert score == pytest.approx(sum(flags.values()) / len(flags))


# ----------------------------------------------------------------- aggregate

def test_evaluate_maps_folds_lists_and_verdict():
    grid, ctx = slab_ctx()
    maps = [ones_map(grid, NEAR), ones_map(grid, FAR), ones_map(grid, NEAR + FAR)]
    scores = evaluate_maps(ctx, I3, maps)
    assert scores.visibility == [visibility(ctx, I3, m) for m in maps]
    assert scores.reachability == [reachability(ctx, I3, m) for m in maps]
    assert scores.visibility_median == lower_median(scores.visibility)
    assert scores.reachability_median == lower_median(scores.reachability)
    assert scores.threshold == 0.5
    # reach medians land exactly on 0.5: strictness makes this a failure
    assert scores.reachability_median == 0.5
    assert scores.success is False


def test_evaluate_maps_repeatable():
    grid, ctx = slab_ctx()
    maps = [ones_map(grid, NEAR), ones_map(grid, NEAR + FAR)]
    a = evaluate_maps(ctx, I3, maps)
    b = evaluate_maps(ctx, I3, maps)
    assert a.visibility == b.visibility
    assert a.reachability == b.reachability
    assert a.success == b.success


def test_scores_bounded_on_slab_scene():
    grid, ctx = slab_ctx()
    for cm in (ones_map(grid, NEAR), ones_map(grid, FAR), ones_map(grid, NEAR + FAR)):
        for fn in (visibility, reachability):
            v = fn(ctx, I3, cm)
            assert 0.0 <= v <= 1.0
