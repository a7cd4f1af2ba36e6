"""Antipodal sampling, gripper collision, occlusion scoring, ranking."""
import numpy as np
import pytest

from conftest import box_grid, make_grid
from handover.contacts import ContactCluster
from handover.grasping import (
    GraspCandidate,
    GripperModel,
    contact_score,
    occlusion_fraction,
    rank_grasps,
    sample_grasps,
)
from handover.voxelgeom import estimate_normals


GRIPPER = GripperModel()


def sample_default(grid, **kw):
    return sample_grasps(grid, estimate_normals(grid), GRIPPER, **kw)


def collision_oracle(gripper, cand, grid) -> bool:
    """Brute force: any occupied voxel center inside a gripper box but
    outside the closing region (boxes restated from the model fields)."""
    ft, fl, pd = gripper.finger_thickness, gripper.finger_length, gripper.palm_depth
    hw = cand.width / 2.0
    eps = 1e-9
    for c in grid.occupied_centers:
        x, y, z = cand.rotation.T @ (c - cand.translation)
        finger = abs(x) <= ft / 2 and hw <= abs(y) <= hw + ft and abs(z) <= fl / 2
        palm = abs(x) <= ft / 2 and abs(y) <= hw + ft and fl / 2 <= z <= fl / 2 + pd
        region = abs(x) <= ft / 2 + eps and abs(y) <= hw + eps and abs(z) <= fl / 2 + eps
        if (finger or palm) and not region:
            return True
    return False


class TestSampling:
    def test_box_yields_high_confidence_face_pairs(self):
        grid = box_grid((20, 20, 20), (6, 6, 6), (13, 13, 13))  # 8 cm cube
        cands = sample_default(grid, max_candidates=100, seed=0)
        assert cands
        assert any(c.confidence >= 0.99 for c in cands)
        # face-opposing pair: contacts straddle the box along the closing axis
        best = max(cands, key=lambda c: c.confidence)
        p, q = best.contact_pair
        assert sum(abs(a - b) for a, b in zip(p, q)) >= 7

    def test_sphere_wider_than_gripper_yields_nothing(self):
        n = 20
        c = (n - 1) / 2.0
        xs, ys, zs = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        occ = (xs - c) ** 2 + (ys - c) ** 2 + (zs - c) ** 2 <= 7.0**2  # 0.14 m across
        grid = make_grid(occ, voxel_size=0.01)
        assert sample_default(grid, max_candidates=50, seed=1) == []

    def test_rod_candidates_confident_and_collision_free(self):
        grid = box_grid((30, 8, 8), (4, 3, 3), (25, 4, 4))  # 22 cm, 2 cm square
        cands = sample_default(grid, max_candidates=200, seed=2)
        assert cands
        for cand in cands:
            assert cand.confidence >= 0.23
            assert cand.width <= GRIPPER.max_width
            assert not collision_oracle(GRIPPER, cand, grid)

    def test_determinism_and_cap(self):
        grid = box_grid((20, 20, 20), (6, 6, 6), (13, 13, 13))
        a = sample_default(grid, max_candidates=40, seed=5)
        b = sample_default(grid, max_candidates=40, seed=5)
        assert len(a) == len(b) <= 40
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.rotation, cb.rotation)
            assert np.array_equal(ca.translation, cb.translation)
            assert (ca.width, ca.confidence, ca.contact_pair) == (
                cb.width,
                cb.confidence,
                cb.contact_pair,
            )

    def test_candidates_sorted_by_confidence(self):
        grid = box_grid((24, 12, 12), (3, 4, 4), (20, 7, 7))
        cands = sample_default(grid, max_candidates=60, seed=3)
        confs = [c.confidence for c in cands]
        assert confs == sorted(confs, reverse=True)

    def test_approach_perpendicular_to_closing_axis(self):
        grid = box_grid((16, 16, 16), (5, 5, 5), (10, 10, 10))
        for cand in sample_default(grid, max_candidates=30, seed=4):
            approach = cand.approach_axis
            closing = cand.rotation[:, 1]
            assert abs(np.dot(approach, closing)) < 1e-9
            assert np.allclose(cand.rotation @ cand.rotation.T, np.eye(3), atol=1e-9)


def line_cluster(grid, indices):
    members = sorted(indices)
    centroid = grid.centers(np.asarray(members, dtype=float)).mean(axis=0)
    return ContactCluster(members, centroid)


class TestOcclusion:
    def test_distant_gripper_and_averted_rays_zero(self):
        grid = box_grid((10, 10, 10), (2, 2, 2), (7, 7, 7))
        cluster = line_cluster(grid, grid.surface[:10])
        normals = {i: np.array([-1.0, 0.0, 0.0]) for i in cluster.member_indices}
        cand = GraspCandidate(np.eye(3), (1.0, 0.05, 0.05), 0.04, 1.0, ((0, 0, 0), (1, 0, 0)))
        assert occlusion_fraction(cand, cluster, normals, GRIPPER, grid) == 0.0

    def test_three_of_ten_covered_is_0_3(self):
        occ = np.zeros((4, 14, 4), dtype=bool)
        occ[1, 2:12, 1] = True
        grid = make_grid(occ, voxel_size=0.01)
        members = [(1, y, 1) for y in range(2, 12)]
        cluster = line_cluster(grid, members)
        normals = {i: np.array([-1.0, 0.0, 0.0]) for i in members}
        # closing axis along the row; width 0.022 covers exactly the middle
        # three centers (spacing 0.01)
        mid = grid.center((1, 6, 1))
        cand = GraspCandidate(np.eye(3), mid, 0.022, 1.0, (members[0], members[-1]))
        assert occlusion_fraction(cand, cluster, normals, GRIPPER, grid) == pytest.approx(0.3)

    def test_closing_on_whole_cluster_is_one(self):
        occ = np.zeros((4, 9, 4), dtype=bool)
        occ[1, 2:7, 1] = True
        grid = make_grid(occ, voxel_size=0.01)
        members = [(1, y, 1) for y in range(2, 7)]
        cluster = line_cluster(grid, members)
        normals = {i: np.array([0.0, 0.0, 1.0]) for i in members}
        cand = GraspCandidate(np.eye(3), grid.center((1, 4, 1)), 0.08, 1.0, (members[0], members[-1]))
        assert occlusion_fraction(cand, cluster, normals, GRIPPER, grid) == 1.0

    def test_empty_cluster_raises(self):
        grid = box_grid((6, 6, 6), (1, 1, 1), (4, 4, 4))
        cand = GraspCandidate(np.eye(3), (0, 0, 0), 0.02, 1.0, ((0, 0, 0), (1, 0, 0)))
        with pytest.raises(ValueError, match="empty contact map"):
            occlusion_fraction(cand, ContactCluster([], np.zeros(3)), {}, GRIPPER, grid)

    def test_translation_equivariance(self):
        occ = np.zeros((8, 12, 8), dtype=bool)
        occ[3, 2:10, 3] = True
        shift = np.array([5.0, -2.0, 1.5])
        members = [(3, y, 3) for y in range(2, 10)]
        normals = {i: np.array([1.0, 0.0, 0.0]) for i in members}
        vals = []
        for origin in ((0, 0, 0), shift):
            grid = make_grid(occ, voxel_size=0.01, origin=origin)
            cluster = line_cluster(grid, members)
            t = grid.center((3, 5, 3)) + np.array([0.0, 0.0, 0.02])
            cand = GraspCandidate(np.eye(3), t, 0.03, 1.0, (members[0], members[1]))
            vals.append(occlusion_fraction(cand, cluster, normals, GRIPPER, grid))
        assert vals[0] == vals[1]


def synthetic_ranked_set():
    """Candidates over a tiny rod: varying confidence, varying occlusion."""
    occ = np.zeros((6, 16, 6), dtype=bool)
    occ[2, 2:14, 2] = True
    grid = make_grid(occ, voxel_size=0.01)
    members = [(2, y, 2) for y in range(2, 14)]
    cluster = line_cluster(grid, members)
    normals = {i: np.array([-1.0, 0.0, 0.0]) for i in members}
    rng = np.random.default_rng(0)
    cands = []
    for k in range(12):
        # slide the closing window along the rod to vary coverage
        t = grid.center((2, 2 + k, 2))
        cands.append(
            GraspCandidate(np.eye(3), t, 0.024, float(rng.uniform(0.3, 1.0)), (members[0], members[1]))
        )
    return grid, cluster, normals, cands


class TestScoringAndRanking:
    def test_contact_score_examples(self):
        assert contact_score(0.8, 0.2, 0.5) == pytest.approx(0.3, abs=1e-12)
        a = contact_score(0.7, 0.0, 0.5)
        b = contact_score(0.7, 0.5, 0.5)
        assert a - b == pytest.approx(0.25, abs=1e-12)
        with pytest.raises(ValueError):
            contact_score(0.5, 0.5, 1.5)

    def test_monotonicity(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            s, o, lam = rng.uniform(0, 1, 3)
            lam = float(np.clip(lam, 0.01, 0.99))
            assert contact_score(s, o + 0.1, lam) < contact_score(s, o, lam)
            assert contact_score(s + 0.1, o, lam) > contact_score(s, o, lam)

    def test_lambda_one_matches_confidence_order(self):
        grid, cluster, normals, cands = synthetic_ranked_set()
        ranked = rank_grasps(cands, cluster, 1.0, normals, GRIPPER, grid)
        confs = [rg.candidate.confidence for rg in ranked]
        assert confs == sorted(confs, reverse=True)

    def test_lambda_zero_matches_occlusion_order(self):
        grid, cluster, normals, cands = synthetic_ranked_set()
        ranked = rank_grasps(cands, cluster, 0.0, normals, GRIPPER, grid)
        occs = [rg.occlusion for rg in ranked]
        assert occs == sorted(occs)

    def test_score_formula_and_tie_chain(self):
        grid, cluster, normals, cands = synthetic_ranked_set()
        for lam in (0.0, 0.25, 0.5, 1.0):
            ranked = rank_grasps(cands, cluster, lam, normals, GRIPPER, grid)
            for rg in ranked:
                expect = lam * rg.candidate.confidence - (1 - lam) * rg.occlusion
                assert rg.score == pytest.approx(expect, abs=1e-12)
            keys = [(-rg.score, -rg.candidate.confidence, rg.occlusion) for rg in ranked]
            assert keys == sorted(keys)

    def test_empty_candidates_error(self):
        grid, cluster, normals, _ = synthetic_ranked_set()
        with pytest.raises(ValueError, match="no grasp candidates"):
            rank_grasps([], cluster, 0.5, normals, GRIPPER, grid)
