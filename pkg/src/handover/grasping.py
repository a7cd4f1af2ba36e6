"""Parallel-jaw grasp sampling and contact-aware ranking.

Gripper frame: +y is the closing axis (fingers straddle the held point along
it), -z is the approach axis (the gripper travels along -z to reach the
object, palm on the +z side). The pose translation is the held point, i.e.
the midpoint of the grasped contact pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contacts import ContactCluster
from .voxelgeom import Index, VoxelGrid

MAX_NORMAL_OPPOSITION_DEG = 30.0  # antipodal pair filter
MIN_CONFIDENCE = 0.23  # alignment score floor for kept candidates
ROLL_STEP_DEG = 45.0
OCCLUSION_RAY_FACTOR = 4.0  # occlusion ray length, in finger lengths
REGION_EPS = 1e-9  # closing-region boundary inflation


@dataclass
class GripperModel:
    """Two-finger gripper reduced to three axis-aligned boxes in its own
    frame. Dimensions in meters."""

    finger_length: float = 0.05
    finger_thickness: float = 0.015
    max_width: float = 0.10
    palm_depth: float = 0.04

    def __post_init__(self):
        for name in ("finger_length", "finger_thickness", "max_width", "palm_depth"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive")

    def boxes(self, width: float):
        """Finger/finger/palm boxes as (lo, hi) pairs at jaw opening `width`."""
        if not (0.0 < width <= self.max_width):
            raise ValueError("width must lie in (0, max_width]")
        ft = self.finger_thickness
        fl = self.finger_length
        hw = width / 2.0
        hx = ft / 2.0
        finger_pos = (np.array([-hx, hw, -fl / 2]), np.array([hx, hw + ft, fl / 2]))
        finger_neg = (np.array([-hx, -hw - ft, -fl / 2]), np.array([hx, -hw, fl / 2]))
        palm = (
            np.array([-hx, -hw - ft, fl / 2]),
            np.array([hx, hw + ft, fl / 2 + self.palm_depth]),
        )
        return [finger_pos, finger_neg, palm]

    def closing_region(self, width: float):
        """Between-finger volume (where grasped material lives)."""
        ft = self.finger_thickness
        fl = self.finger_length
        hw = width / 2.0
        return (np.array([-ft / 2, -hw, -fl / 2]), np.array([ft / 2, hw, fl / 2]))

    def in_closing_region(self, rotation, translation, width, points) -> np.ndarray:
        """Boolean mask: which world points lie in the closing region (with a
        1e-9 boundary inflation so grasped-pair centers count as inside)."""
        local = (np.atleast_2d(points) - translation) @ rotation
        lo, hi = self.closing_region(width)
        return ((local >= lo - REGION_EPS) & (local <= hi + REGION_EPS)).all(axis=1)

    def ray_blocked(self, rotation, translation, width, origin, direction, max_distance) -> bool:
        """Does a world-frame ray hit any gripper box within max_distance?"""
        o = rotation.T @ (np.asarray(origin, dtype=float) - translation)
        d = rotation.T @ np.asarray(direction, dtype=float)
        for lo, hi in self.boxes(width):
            t0, t1 = 0.0, max_distance
            ok = True
            for a in range(3):
                if d[a] == 0.0:
                    if o[a] < lo[a] or o[a] > hi[a]:
                        ok = False
                        break
                    continue
                ta = (lo[a] - o[a]) / d[a]
                tb = (hi[a] - o[a]) / d[a]
                if ta > tb:
                    ta, tb = tb, ta
                t0 = max(t0, ta)
                t1 = min(t1, tb)
                if t0 > t1:
                    ok = False
                    break
            if ok:
                return True
        return False

    def surface_points(self, width: float, pitch: float) -> np.ndarray:
        """Points sampled on the faces of all three boxes at the given pitch,
        in gripper frame. Used for clearance and reach checks."""
        pts = []
        for lo, hi in self.boxes(width):
            axes = [np.arange(lo[a], hi[a] + pitch / 2, pitch) for a in range(3)]
            for a in range(3):
                u, v = (a + 1) % 3, (a + 2) % 3
                gu, gv = np.meshgrid(axes[u], axes[v], indexing="ij")
                for bound in (lo[a], hi[a]):
                    face = np.empty((gu.size, 3))
                    face[:, a] = bound
                    face[:, u] = gu.ravel()
                    face[:, v] = gv.ravel()
                    pts.append(face)
        return np.vstack(pts)


@dataclass
class GraspCandidate:
    rotation: np.ndarray  # (3,3), columns are gripper axes in world
    translation: np.ndarray  # held point (midpoint of the contact pair)
    width: float
    confidence: float  # antipodal alignment score in [0, 1]
    contact_pair: tuple[Index, Index]

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)

    @property
    def pose(self) -> np.ndarray:
        """Homogeneous 4x4, row-major."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def approach_axis(self) -> np.ndarray:
        return -self.rotation[:, 2]


@dataclass
class RankedGrasp:
    candidate: GraspCandidate
    occlusion: float
    score: float


# -- sampling ------------------------------------------------------------------


def _perpendicular(axis: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to `axis`: project out the world
    axis least aligned with it."""
    a = np.abs(axis)
    seed = np.zeros(3)
    seed[int(np.argmin(a))] = 1.0
    v = seed - np.dot(seed, axis) * axis
    return v / np.linalg.norm(v)


def _grasp_frame(closing_axis: np.ndarray, approach: np.ndarray) -> np.ndarray:
    z = -approach
    x = np.cross(closing_axis, z)
    return np.column_stack([x, closing_axis, z])


def sample_grasps(
    grid: VoxelGrid,
    normals: dict[Index, np.ndarray],
    gripper: GripperModel,
    max_candidates: int = 200,
    seed: int = 0,
):
    """Antipodal grasp sampling over surface voxels.

    For each surface voxel p (in seeded random order) the sampler steps
    through the body along -normal(p) and pairs p with every surface voxel
    passed whose normal opposes within 30 degrees and whose center lies
    within max_width. Each pair spawns one candidate per 45-degree roll of
    the approach axis about the closing axis; candidates that collide with
    occupied voxels outside the closing region, or whose alignment
    confidence falls below 0.23, are dropped. At most `max_candidates`
    survive, highest confidence first (stable in generation order).
    """
    surface = grid.surface
    if not surface:
        return []
    vs = grid.voxel_size
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(surface))
    occupied = grid.occupied_centers
    cos_limit = math.cos(math.radians(MAX_NORMAL_OPPOSITION_DEG))
    rolls = np.radians(np.arange(0.0, 360.0, ROLL_STEP_DEG))
    surface_set = set(surface)
    pool: list[GraspCandidate] = []
    pool_cap = max(8 * max_candidates, 64)
    step_lens = np.arange(0.5 * vs, gripper.max_width + 2 * vs, 0.5 * vs)
    # over all rolls the gripper sweeps a slab around the closing axis: no
    # point beyond these two bounds can touch any box, at any roll angle
    axial_max = gripper.max_width / 2 + gripper.finger_thickness + 2 * REGION_EPS
    radial_max = math.hypot(
        gripper.finger_thickness / 2, gripper.finger_length / 2 + gripper.palm_depth
    ) + 2 * REGION_EPS

    for si in order:
        p = surface[si]
        n_p = normals[p]
        c_p = grid.center(p)
        probe = c_p - np.outer(step_lens, n_p)
        cells = np.floor((probe - grid.origin) / vs).astype(int)
        seen: list[Index] = []
        seen_set = {p}
        for row in cells:
            q = (int(row[0]), int(row[1]), int(row[2]))
            if q in seen_set:
                continue
            seen_set.add(q)
            if q in surface_set:
                seen.append(q)
        for q in seen:
            n_q = normals[q]
            if float(np.dot(n_p, -n_q)) < cos_limit:
                continue
            c_q = grid.center(q)
            width = float(np.linalg.norm(c_q - c_p))
            if width > gripper.max_width or width < 0.5 * vs:
                continue
            axis = (c_q - c_p) / width
            confidence = 0.5 * float(np.dot(n_p, -axis)) + 0.5 * float(np.dot(n_q, axis))
            confidence = min(max(confidence, 0.0), 1.0)
            if confidence < MIN_CONFIDENCE:
                continue
            mid = (c_p + c_q) / 2.0
            rel = occupied - mid
            along = rel @ axis
            r2 = np.einsum("ij,ij->i", rel, rel) - along * along
            near = occupied[
                (np.abs(along) <= axial_max) & (r2 <= radial_max * radial_max)
            ]
            b0 = _perpendicular(axis)
            b1 = np.cross(axis, b0)
            for theta in rolls:
                approach = math.cos(theta) * b0 + math.sin(theta) * b1
                rot = _grasp_frame(axis, approach)
                if _collides(gripper, rot, mid, width, near):
                    continue
                pool.append(GraspCandidate(rot, mid, width, confidence, (p, q)))
        if len(pool) >= pool_cap:
            break

    ranked = sorted(range(len(pool)), key=lambda i: (-pool[i].confidence, i))
    return [pool[i] for i in ranked[:max_candidates]]


def _collides(gripper, rotation, translation, width, points) -> bool:
    """True when any point (voxel center) falls inside a gripper box but
    outside the closing region.

    Fused form of the boxes()/closing_region() tests; both fingers share
    x/z bounds, so one |y| band covers them."""
    if len(points) == 0:
        return False
    local = (points - translation) @ rotation
    ax = np.abs(local[:, 0])
    ay = np.abs(local[:, 1])
    z = local[:, 2]
    az = np.abs(z)
    ft = gripper.finger_thickness
    hfl = gripper.finger_length / 2.0
    hx = ft / 2.0
    hw = width / 2.0
    in_x = ax <= hx
    finger = in_x & (ay >= hw) & (ay <= hw + ft) & (az <= hfl)
    palm = in_x & (ay <= hw + ft) & (z >= hfl) & (z <= hfl + gripper.palm_depth)
    in_region = (
        (ax <= hx + REGION_EPS) & (ay <= hw + REGION_EPS) & (az <= hfl + REGION_EPS)
    )
    return bool(((finger | palm) & ~in_region).any())




# -- occlusion + ranking ---------------------------------------------------------


def occlusion_fraction(
    grasp: GraspCandidate,
    cluster: ContactCluster,
    normals: dict[Index, np.ndarray],
    gripper: GripperModel,
    grid: VoxelGrid,
) -> float:
    """Fraction of cluster voxels the gripper hides.

    A voxel is blocked when a ray from its center (offset 1.5 voxel edges
    along its own normal) hits a gripper box within 4 finger lengths, or when
    the center lies in the closing region. Counts stay integral until the
    single final division.
    """
    if cluster.size == 0:
        raise ValueError("empty contact map")
    centers = np.array([grid.center(i) for i in cluster.member_indices])
    nrm = np.array([normals[i] for i in cluster.member_indices])
    return _occlusion_core(grasp, centers, nrm, gripper, grid.voxel_size)


def _occlusion_core(grasp, centers, nrm, gripper, voxel_size) -> float:
    """Vectorized body of occlusion_fraction over precomputed cluster
    centers/normals arrays (same order as the cluster members)."""
    max_dist = OCCLUSION_RAY_FACTOR * gripper.finger_length
    rot = grasp.rotation
    t = grasp.translation
    covered = gripper.in_closing_region(rot, t, grasp.width, centers)
    o_loc = (centers + 1.5 * voxel_size * nrm - t) @ rot
    d_loc = nrm @ rot
    hit = np.zeros(len(centers), dtype=bool)
    for lo, hi in gripper.boxes(grasp.width):
        t0 = np.zeros(len(centers))
        t1 = np.full(len(centers), max_dist)
        ok = ~covered & ~hit  # rays still worth testing
        for a in range(3):
            d = d_loc[:, a]
            o = o_loc[:, a]
            zero = d == 0.0
            ok &= ~zero | ((o >= lo[a]) & (o <= hi[a]))
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo[a] - o) / d
                tb = (hi[a] - o) / d
            swap = ta > tb
            ta2 = np.where(swap, tb, ta)
            tb2 = np.where(swap, ta, tb)
            t0 = np.where(zero, t0, np.maximum(t0, ta2))
            t1 = np.where(zero, t1, np.minimum(t1, tb2))
            ok &= zero | (t0 <= t1)
        hit |= ok
    blocked = int(np.count_nonzero(covered | hit))
    return blocked / len(centers)


def contact_score(confidence: float, occlusion: float, lam: float) -> float:
    """Ranking objective: lam * confidence - (1 - lam) * occlusion."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lam must lie in [0, 1]")
    return lam * confidence - (1.0 - lam) * occlusion


def rank_grasps(
    candidates,
    cluster: ContactCluster,
    lam: float,
    normals,
    gripper: GripperModel,
    grid: VoxelGrid,
):
    """Score candidates and order them best-first.

    Ties break by higher confidence, then lower occlusion, then candidate
    position in the input list.
    """
    if not candidates:
        raise ValueError("no grasp candidates")
    centers = np.array([grid.center(i) for i in cluster.member_indices])
    nrm = np.array([normals[i] for i in cluster.member_indices])
    ranked = []
    for i, cand in enumerate(candidates):
        occ = _occlusion_core(cand, centers, nrm, gripper, grid.voxel_size)
        ranked.append((i, RankedGrasp(cand, occ, contact_score(cand.confidence, occ, lam))))
    ranked.sort(key=lambda item: (-item[1].score, -item[1].candidate.confidence, item[1].occlusion, item[0]))
    return [rg for _, rg in ranked]


def grasp_records(ranked) -> list[dict]:
    """JSON-ready export: 4x4 row-major pose plus scores per grasp."""
    out = []
    for rg in ranked:
        c = rg.candidate
        out.append(
            {
                "pose": c.pose.tolist(),
                "width": c.width,
                "confidence": c.confidence,
                "occlusion": rg.occlusion,
                "score": rg.score,
                "contact_pair": [list(c.contact_pair[0]), list(c.contact_pair[1])],
            }
        )
    return out
