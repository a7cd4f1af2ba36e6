"""Shared builders: tiny meshes, voxel grids, and the bundled scene set."""
import numpy as np
import pytest

from handover import suite
from handover.harness import Scene, load_scene
from handover.voxelgeom import Mesh, VoxelGrid


def make_grid(occ, voxel_size=0.01, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    occ = np.asarray(occ, dtype=bool)
    return VoxelGrid(occ.shape, voxel_size, np.asarray(origin, dtype=float), occ)


def box_grid(dims, lo, hi, voxel_size=0.01, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    """Grid with the inclusive index box [lo, hi] occupied."""
    occ = np.zeros(dims, dtype=bool)
    occ[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1] = True
    return make_grid(occ, voxel_size, origin)


def cube_mesh(size=1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    h = size / 2.0
    c = np.asarray(center, dtype=float)
    corners = np.array(
        [[sx, sy, sz] for sx in (-h, h) for sy in (-h, h) for sz in (-h, h)]
    ) + c
    # two triangles per face, outward winding not required by the voxelizer
    faces = [
        (0, 1, 3), (0, 3, 2),  # -x
        (4, 6, 7), (4, 7, 5),  # +x
        (0, 4, 5), (0, 5, 1),  # -y
        (2, 3, 7), (2, 7, 6),  # +y
        (0, 2, 6), (0, 6, 4),  # -z
        (1, 5, 7), (1, 7, 3),  # +z
    ]
    return Mesh(corners, np.array(faces))


def icosphere_mesh(radius=0.5, subdivisions=3, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Subdivided icosahedron with vertices projected onto the sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=float)
    return Mesh(v, np.array(faces))


def write_obj(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation from a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def segment_hits_aabb(origin, end, lo, hi) -> bool:
    """Exact slab test: does the open segment origin->end cross [lo, hi]?"""
    d = end - origin
    t0, t1 = 0.0, 1.0
    for a in range(3):
        if d[a] == 0.0:
            if origin[a] < lo[a] or origin[a] > hi[a]:
                return False
            continue
        ta = (lo[a] - origin[a]) / d[a]
        tb = (hi[a] - origin[a]) / d[a]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return t1 > 0.0 and t0 < 1.0


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("suite")
    suite.write_suite(d)
    return d


@pytest.fixture(scope="session")
def scenes(suite_dir) -> dict[str, Scene]:
    """Bundled scenes, loaded once; grasp caches accumulate across tests."""
    return {name: load_scene(suite_dir / f"{name}.scene.json") for name in suite.OBJECT_NAMES}
