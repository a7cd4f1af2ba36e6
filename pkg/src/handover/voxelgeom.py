"""Voxel-grid substrate: solid voxelization, surface extraction, normals, ray casting.

Conventions used throughout the package:
  * world frame is z-up, units are meters, angles are degrees at API boundaries
  * a grid cell (x, y, z) owns the half-open world cube
    [origin + i*voxel_size, origin + (i+1)*voxel_size) per axis
  * cell centers sit at origin + (i + 0.5) * voxel_size
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

Index = tuple[int, int, int]

# 26-neighborhood offsets, fixed order (lexicographic, no zero vector)
_OFFSETS_26 = np.array(
    [
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) != (0, 0, 0)
    ],
    dtype=float,
)


@dataclass
class Mesh:
    """Triangle soup with shared vertices.

    vertices: (n, 3) float array in meters.
    faces: (m, 3) int array of vertex indices.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=int)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (m, 3)")


def load_obj(path) -> Mesh:
    """Parse the v/f subset of Wavefront OBJ. Indices are 1-based; 'f a/b/c'
    forms are accepted (only the vertex index is used)."""
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise ValueError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tag == "f":
                if len(tokens) < 4:
                    raise ValueError(f"{path}:{lineno}: face needs 3 indices")
                idx = []
                for tok in tokens[1:4]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise ValueError(f"{path}:{lineno}: bad face index {tok!r}") from exc
                    if i < 0:
                        i = len(vertices) + 1 + i
                    idx.append(i - 1)
                faces.append(idx)
            # other record types (vn, vt, o, g, s, usemtl, ...) are ignored
    if not faces:
        raise ValueError(f"{path}: empty mesh")
    faces_arr = np.asarray(faces, dtype=int)
    if faces_arr.min() < 0 or faces_arr.max() >= len(vertices):
        raise ValueError(f"{path}: face index out of range")
    return Mesh(np.asarray(vertices, dtype=float), faces_arr)


@dataclass(eq=False)
class VoxelGrid:
    """Dense boolean occupancy over a cubic-cell lattice.

    occupancy is indexed [x, y, z] and is made read-only after construction;
    derived surface/normal data is cached lazily.
    """

    dims: tuple[int, int, int]
    voxel_size: float
    origin: np.ndarray
    occupancy: np.ndarray

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must be >= 1 per axis")
        self.voxel_size = float(self.voxel_size)
        if not (self.voxel_size > 0):
            raise ValueError("voxel_size must be positive")
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != self.dims:
            raise ValueError(f"occupancy shape {occ.shape} != dims {self.dims}")
        occ = occ.copy()
        occ.setflags(write=False)
        self.occupancy = occ

    # -- geometry helpers -------------------------------------------------

    def center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.voxel_size

    def centers(self, indices) -> np.ndarray:
        arr = np.asarray(indices, dtype=float).reshape(-1, 3)
        return self.origin + (arr + 0.5) * self.voxel_size

    def world_to_index(self, point) -> Index:
        g = np.floor((np.asarray(point, dtype=float) - self.origin) / self.voxel_size)
        return (int(g[0]), int(g[1]), int(g[2]))

    def in_bounds(self, idx) -> bool:
        return all(0 <= idx[a] < self.dims[a] for a in range(3))

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    @cached_property
    def occupied_centers(self) -> np.ndarray:
        return self.centers(np.argwhere(self.occupancy))

    @cached_property
    def surface(self) -> list[Index]:
        return surface_voxels(self)

    @cached_property
    def normals(self) -> dict[Index, np.ndarray]:
        return estimate_normals(self, self.surface)


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray  # unit vector
    max_distance: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.direction = np.asarray(self.direction, dtype=float).reshape(3)
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-6:
            raise ValueError("direction must be unit length")
        self.max_distance = float(self.max_distance)
        if not (self.max_distance > 0):
            raise ValueError("max_distance must be positive")


# -- voxelization ----------------------------------------------------------


def _edge(ax, ay, bx, by, px, py):
    """2D edge function: cross(b - a, p - a). Positive = p left of a->b."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def voxelize_mesh(mesh: Mesh, dims=(64, 64, 64), padding: float = 0.05) -> VoxelGrid:
    """Solid voxelization by even-odd parity of surface crossings along +z.

    The grid is sized so the mesh bounding box (expanded by `padding` as a
    fraction of its extent, per side) fits inside `dims` with cubic cells;
    the mesh is centered in the grid.

    A cell is occupied iff its center sees an odd number of triangle
    crossings below it along z. Shared triangle edges are resolved with a
    consistent perturbation rule so watertight meshes fill without seams.
    """
    if isinstance(dims, int):
        dims = (dims, dims, dims)
    dims = tuple(int(d) for d in dims)
    if len(mesh.faces) == 0:
        raise ValueError("empty mesh")
    verts = mesh.vertices
    if not np.isfinite(verts).all():
        raise ValueError("mesh larger than representable extent: non-finite vertex")
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    extent = hi - lo
    if float(extent.max()) <= 0:
        raise ValueError("mesh larger than representable extent: zero-extent bounding box")
    padded = extent * (1.0 + 2.0 * padding)
    voxel_size = float(max(padded[a] / dims[a] for a in range(3)))
    if not (voxel_size > 0 and math.isfinite(voxel_size)):
        raise ValueError("mesh larger than representable extent")
    mid = (lo + hi) / 2.0
    origin = mid - np.asarray(dims, dtype=float) * voxel_size / 2.0

    nx, ny, nz = dims
    # z values of all cell centers, shared by every column
    zc = origin[2] + (np.arange(nz) + 0.5) * voxel_size
    crossings: dict[tuple[int, int], list[float]] = {}

    cx0 = origin[0] + 0.5 * voxel_size
    cy0 = origin[1] + 0.5 * voxel_size
    for tri in mesh.faces:
        v0, v1, v2 = verts[tri[0]], verts[tri[1]], verts[tri[2]]
        area2 = _edge(v0[0], v0[1], v1[0], v1[1], v2[0], v2[1])
        if area2 == 0.0:
            continue  # degenerate in projection; vertical wall, no z crossing
        if area2 < 0:
            v1, v2 = v2, v1
            area2 = -area2
        # candidate columns limited to the triangle's xy bounding box
        txlo = min(v0[0], v1[0], v2[0])
        txhi = max(v0[0], v1[0], v2[0])
        tylo = min(v0[1], v1[1], v2[1])
        tyhi = max(v0[1], v1[1], v2[1])
        ix0 = max(0, int(math.ceil((txlo - cx0) / voxel_size)))
        ix1 = min(nx - 1, int(math.floor((txhi - cx0) / voxel_size)))
        iy0 = max(0, int(math.ceil((tylo - cy0) / voxel_size)))
        iy1 = min(ny - 1, int(math.floor((tyhi - cy0) / voxel_size)))
        if ix0 > ix1 or iy0 > iy1:
            continue
        ixs = np.arange(ix0, ix1 + 1)
        iys = np.arange(iy0, iy1 + 1)
        px = (cx0 + ixs * voxel_size)[:, None]
        py = (cy0 + iys * voxel_size)[None, :]
        w0 = _edge(v1[0], v1[1], v2[0], v2[1], px, py)
        w1 = _edge(v2[0], v2[1], v0[0], v0[1], px, py)
        w2 = _edge(v0[0], v0[1], v1[0], v1[1], px, py)
        inside = np.ones(w0.shape, dtype=bool)
        for w, (a, b) in ((w0, (v1, v2)), (w1, (v2, v0)), (w2, (v0, v1))):
            dx = b[0] - a[0]
            dy = b[1] - a[1]
            # tie rule: boundary counts iff a +x-infinitesimal perturbation
            # lands strictly inside (dy < 0, or dy == 0 and dx > 0)
            on_tie = dy < 0 or (dy == 0 and dx > 0)
            inside &= (w > 0) | ((w == 0) & on_tie)
        if not inside.any():
            continue
        zhit = (w0 * v0[2] + w1 * v1[2] + w2 * v2[2]) / (w0 + w1 + w2)
        for ii, iv in enumerate(ixs):
            row = inside[ii]
            if not row.any():
                continue
            for jj in np.nonzero(row)[0]:
                crossings.setdefault((int(iv), int(iys[jj])), []).append(float(zhit[ii, jj]))

    occ = np.zeros(dims, dtype=bool)
    for (ix, iy), zs in crossings.items():
        zs_arr = np.sort(np.asarray(zs))
        below = np.searchsorted(zs_arr, zc, side="right")
        occ[ix, iy, :] = (below % 2) == 1
    return VoxelGrid(dims, voxel_size, origin, occ)


# -- surface + normals -----------------------------------------------------


def surface_voxels(grid: VoxelGrid) -> list[Index]:
    """Occupied cells with at least one unoccupied 6-neighbor (out-of-bounds
    counts as unoccupied). Returned in lexicographic index order."""
    occ = grid.occupancy
    padded = np.pad(occ, 1, mode="constant", constant_values=False)
    exposed = np.zeros_like(occ)
    core = (slice(1, -1),) * 3
    for axis in range(3):
        for shift in (-1, 1):
            sl = [slice(1, -1)] * 3
            sl[axis] = slice(1 + shift, padded.shape[axis] - 1 + shift)
            exposed |= ~padded[tuple(sl)]
    surf = occ & exposed
    return [tuple(int(v) for v in row) for row in np.argwhere(surf)]


def estimate_normals(grid: VoxelGrid, surface=None) -> dict[Index, np.ndarray]:
    """Outward normal per surface voxel.

    Primary estimate is the negative local occupancy gradient: the sum of
    directions from occupied 26-neighbors to the voxel. When that sum
    vanishes, fall back to the direction from the occupied centroid to the
    voxel center; a lone voxel (centroid == center) gets +z.
    """
    if surface is None:
        surface = surface_voxels(grid)
    occ = grid.occupancy
    padded = np.pad(occ, 1, mode="constant", constant_values=False)
    surf_arr = np.asarray(surface, dtype=int).reshape(-1, 3)
    n = len(surf_arr)
    acc = np.zeros((n, 3), dtype=float)
    base = surf_arr + 1  # padded coordinates
    for off in _OFFSETS_26:
        off_i = off.astype(int)
        nb = base + off_i
        occ_nb = padded[nb[:, 0], nb[:, 1], nb[:, 2]]
        acc -= off * occ_nb[:, None]
    norms = np.linalg.norm(acc, axis=1)
    centroid = grid.occupied_centers.mean(axis=0) if grid.occupied_count else grid.origin
    out: dict[Index, np.ndarray] = {}
    for i, idx in enumerate(surf_arr):
        key = (int(idx[0]), int(idx[1]), int(idx[2]))
        if norms[i] > 1e-12:
            out[key] = acc[i] / norms[i]
            continue
        v = grid.center(idx) - centroid
        vn = float(np.linalg.norm(v))
        out[key] = v / vn if vn > 1e-12 else np.array([0.0, 0.0, 1.0])
    return out


# -- ray casting -----------------------------------------------------------


def _clip_to_box(origin, direction, lo, hi, t_max):
    """Intersect ray parameter range [0, t_max] with an AABB. Returns
    (t_enter, t_exit) or None."""
    t0, t1 = 0.0, t_max
    for a in range(3):
        d = direction[a]
        if d == 0.0:
            if origin[a] < lo[a] or origin[a] >= hi[a]:
                return None
            continue
        ta = (lo[a] - origin[a]) / d
        tb = (hi[a] - origin[a]) / d
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return None
    return t0, t1


def traverse(grid: VoxelGrid, origin, direction, max_distance):
    """Yield (index, entry_distance) for every cell the ray passes through,
    in order, using incremental grid stepping. Distances are world meters."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    vs = grid.voxel_size
    lo = grid.origin
    hi = grid.origin + np.asarray(grid.dims, dtype=float) * vs
    clipped = _clip_to_box(origin, direction, lo, hi, max_distance)
    if clipped is None:
        return
    t0, t1 = clipped
    p = origin + direction * t0
    idx = [0, 0, 0]
    step = [0, 0, 0]
    t_next = [math.inf] * 3
    t_delta = [math.inf] * 3
    for a in range(3):
        i = int(math.floor((p[a] - lo[a]) / vs))
        i = min(max(i, 0), grid.dims[a] - 1)
        idx[a] = i
        d = direction[a]
        if d > 0:
            step[a] = 1
            t_next[a] = ((i + 1) * vs + lo[a] - origin[a]) / d
            t_delta[a] = vs / d
        elif d < 0:
            step[a] = -1
            t_next[a] = (i * vs + lo[a] - origin[a]) / d
            t_delta[a] = -vs / d
    t = t0
    while t <= t1:
        yield (idx[0], idx[1], idx[2]), t
        a = 0
        if t_next[1] < t_next[a]:
            a = 1
        if t_next[2] < t_next[a]:
            a = 2
        t = t_next[a]
        idx[a] += step[a]
        if idx[a] < 0 or idx[a] >= grid.dims[a]:
            return
        t_next[a] += t_delta[a]


def ray_cast(grid: VoxelGrid, ray: Ray, ignore=None):
    """First occupied voxel along the ray, skipping indices in `ignore`.

    Returns (index, entry_distance) or None. The entry distance of a ray
    starting inside the grid is the clipped start (0 when the origin is
    interior).
    """
    occ = grid.occupancy
    skip = ignore if ignore else ()
    for idx, t in traverse(grid, ray.origin, ray.direction, ray.max_distance):
        if occ[idx] and idx not in skip:
            return idx, t
    return None


# -- file format -----------------------------------------------------------


def _format_float(x: float) -> str:
    return repr(float(x))


def save_vgrid(grid: VoxelGrid, path) -> None:
    """Write the plain-text grid format:

        VGRID 1
        dims dx dy dz
        voxel_size s
        origin ox oy oz
        <dims.z * dims.y rows of dims.x chars in {0,1}; x fastest, z slowest>
    """
    nx, ny, nz = grid.dims
    occ = grid.occupancy
    rows = []
    for z in range(nz):
        for y in range(ny):
            rows.append("".join("1" if occ[x, y, z] else "0" for x in range(nx)))
    header = [
        "VGRID 1",
        f"dims {nx} {ny} {nz}",
        f"voxel_size {_format_float(grid.voxel_size)}",
        "origin " + " ".join(_format_float(v) for v in grid.origin),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header + rows) + "\n")


def _parse_grid_header(lines, path, magic):
    if not lines or lines[0].strip() != f"{magic} 1":
        raise ValueError(f"{path}: expected '{magic} 1' header")
    fields = {}
    for i, key in ((1, "dims"), (2, "voxel_size"), (3, "origin")):
        if i >= len(lines):
            raise ValueError(f"{path}: truncated header")
        tokens = lines[i].split()
        if not tokens or tokens[0] != key:
            raise ValueError(f"{path}: line {i + 1}: expected '{key}'")
        fields[key] = tokens[1:]
    dims = tuple(int(v) for v in fields["dims"])
    if len(dims) != 3:
        raise ValueError(f"{path}: dims needs 3 values")
    voxel_size = float(fields["voxel_size"][0])
    origin = np.array([float(v) for v in fields["origin"]], dtype=float)
    if origin.shape != (3,):
        raise ValueError(f"{path}: origin needs 3 values")
    return dims, voxel_size, origin


def load_vgrid(path) -> VoxelGrid:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    dims, voxel_size, origin = _parse_grid_header(lines, path, "VGRID")
    nx, ny, nz = dims
    expected = nz * ny
    body = lines[4 : 4 + expected]
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} data rows, found {len(body)}")
    occ = np.zeros(dims, dtype=bool)
    r = 0
    for z in range(nz):
        for y in range(ny):
            row = body[r]
            r += 1
            if len(row) != nx or set(row) - {"0", "1"}:
                raise ValueError(f"{path}: row {4 + r} malformed")
            occ[:, y, z] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("1")
    return VoxelGrid(dims, voxel_size, origin, occ)
