"""Contact maps: file ingestion, a thickness-based heuristic predictor, and
density clustering of contact voxels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .voxelgeom import Index, VoxelGrid, _format_float, _parse_grid_header

DEFAULT_THRESHOLD = 0.5
DEFAULT_MIN_PTS = 4
EPS_VOXELS = 3.0  # default neighborhood radius, in voxel edge lengths


@dataclass
class ContactMap:
    """Per-voxel contact annotation over a grid.

    values holds only nonzero entries, keyed by voxel index; after ingestion
    every key is a surface voxel of the grid. threshold binarizes
    probabilistic maps for clustering and metric evaluation.
    """

    grid: VoxelGrid
    values: dict[Index, float]
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0, 1)")

    def contact_indices(self) -> list[Index]:
        """Voxels whose value clears the threshold, lexicographic order."""
        return sorted(i for i, v in self.values.items() if v >= self.threshold)

    def total_weight(self) -> float:
        return float(sum(self.values[i] for i in self.contact_indices()))

    @property
    def is_binary(self) -> bool:
        return all(v in (0.0, 1.0) for v in self.values.values())


@dataclass
class ContactCluster:
    member_indices: list[Index]
    centroid: np.ndarray

    @property
    def size(self) -> int:
        return len(self.member_indices)


# -- ingestion ---------------------------------------------------------------


def _snap_to_surface(grid: VoxelGrid, idx: Index) -> Index:
    """Nearest surface voxel by center distance; ties break to the lowest
    (x, y, z) index."""
    surf = np.asarray(grid.surface, dtype=float)
    d2 = ((surf - np.asarray(idx, dtype=float)) ** 2).sum(axis=1)
    best = float(d2.min())
    # grid.surface is already lexicographically sorted, so first hit wins ties
    for i, dist in enumerate(d2):
        if dist == best:
            return grid.surface[i]
    raise AssertionError("unreachable")


def load_contact_map(path, grid: VoxelGrid, threshold: float = DEFAULT_THRESHOLD) -> ContactMap:
    """Read a contact annotation file and register it to `grid`.

    Format mirrors the grid file: 'VCONTACT 1' header, then per-cell values
    either as rows of {0,1} characters or as space-separated floats. Header
    dims must match the grid. Nonzero values landing off the surface are
    snapped to the nearest surface voxel (max value wins a collision).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    dims, _, _ = _parse_grid_header(lines, path, "VCONTACT")
    if dims != grid.dims:
        raise ValueError(f"{path}: dims {dims} do not match grid dims {grid.dims}")
    nx, ny, nz = dims
    expected = nz * ny
    body = lines[4 : 4 + expected]
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} data rows, found {len(body)}")
    raw: dict[Index, float] = {}
    r = 0
    for z in range(nz):
        for y in range(ny):
            row = body[r]
            r += 1
            if " " in row:
                vals = [float(t) for t in row.split()]
            else:
                if len(row) != nx or set(row) - {"0", "1"}:
                    raise ValueError(f"{path}: row {4 + r} malformed")
                vals = [1.0 if c == "1" else 0.0 for c in row]
            if len(vals) != nx:
                raise ValueError(f"{path}: row {4 + r} has {len(vals)} values, expected {nx}")
            for x, v in enumerate(vals):
                if v != 0.0:
                    raw[(x, y, z)] = v
    if not raw:
        raise ValueError(f"{path}: empty contact map")
    surface_set = set(grid.surface)
    values: dict[Index, float] = {}
    for idx in sorted(raw):
        v = raw[idx]
        key = idx if idx in surface_set else _snap_to_surface(grid, idx)
        values[key] = max(values.get(key, 0.0), v)
    return ContactMap(grid, values, threshold)


def save_contact_map(cm: ContactMap, path) -> None:
    """Inverse of load_contact_map: {0,1} rows for binary maps, float rows
    otherwise."""
    grid = cm.grid
    nx, ny, nz = grid.dims
    binary = cm.is_binary
    header = [
        "VCONTACT 1",
        f"dims {nx} {ny} {nz}",
        f"voxel_size {_format_float(grid.voxel_size)}",
        "origin " + " ".join(_format_float(v) for v in grid.origin),
    ]
    rows = []
    for z in range(nz):
        for y in range(ny):
            if binary:
                rows.append(
                    "".join("1" if cm.values.get((x, y, z), 0.0) == 1.0 else "0" for x in range(nx))
                )
            else:
                rows.append(
                    " ".join(_format_float(cm.values.get((x, y, z), 0.0)) for x in range(nx))
                )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header + rows) + "\n")


# -- heuristic predictor ------------------------------------------------------


def _run_lengths(occ: np.ndarray, axis: int) -> np.ndarray:
    """Length of the maximal consecutive occupied run containing each cell,
    along one axis. Zero on unoccupied cells."""
    moved = np.moveaxis(occ, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.zeros(flat.shape, dtype=int)
    n = flat.shape[1]
    for r in range(flat.shape[0]):
        row = flat[r]
        i = 0
        while i < n:
            if not row[i]:
                i += 1
                continue
            j = i
            while j < n and row[j]:
                j += 1
            out[r, i:j] = j - i
            i = j
    return np.moveaxis(out.reshape(moved.shape), -1, axis)


def predict_contacts_heuristic(grid: VoxelGrid, threshold: float = DEFAULT_THRESHOLD) -> ContactMap:
    """Grip-affordance stand-in: thin parts of an object attract contact.

    thickness(v) = min over the three axis directions of the occupied run
    length through v; probability(v) = clamp01((t_max - t) / (t_max - t_min))
    over the surface thickness distribution. Degenerate distributions
    (t_max == t_min, e.g. a bare rod or a single voxel) map to 1.0.
    """
    surface = grid.surface
    if not surface:
        raise ValueError("empty contact map")
    occ = grid.occupancy
    runs = np.minimum(
        np.minimum(_run_lengths(occ, 0), _run_lengths(occ, 1)), _run_lengths(occ, 2)
    )
    surf_arr = np.asarray(surface, dtype=int)
    thick = runs[surf_arr[:, 0], surf_arr[:, 1], surf_arr[:, 2]].astype(float)
    t_min = float(thick.min())
    t_max = float(thick.max())
    values: dict[Index, float] = {}
    for i, idx in enumerate(surface):
        if t_max == t_min:
            p = 1.0
        else:
            p = (t_max - thick[i]) / (t_max - t_min)
            p = min(max(p, 0.0), 1.0)
        values[idx] = p
    return ContactMap(grid, values, threshold)


# -- clustering ---------------------------------------------------------------


def cluster_contacts(cm: ContactMap, eps: float | None = None, min_pts: int = DEFAULT_MIN_PTS):
    """Density clustering (DBSCAN) of thresholded contact voxels.

    Neighborhoods are Euclidean over voxel centers, tested as squared
    distance <= eps**2; a point counts toward its own neighborhood. Seed and
    expansion order is lexicographic voxel-index order, which pins border
    point assignment. Noise is dropped. Clusters come back sorted by size
    descending, ties by lowest member index.
    """
    grid = cm.grid
    if eps is None:
        eps = EPS_VOXELS * grid.voxel_size
    points = cm.contact_indices()
    if not points:
        raise ValueError("empty contact map")
    centers = grid.centers(np.asarray(points, dtype=float))
    n = len(points)
    eps2 = eps * eps

    # bucket index at cell size eps: neighbor candidates come from the
    # 27 surrounding buckets
    buckets: dict[Index, list[int]] = {}
    keys = np.floor(centers / eps).astype(int)
    for i in range(n):
        buckets.setdefault((int(keys[i, 0]), int(keys[i, 1]), int(keys[i, 2])), []).append(i)

    def neighborhood(i: int) -> list[int]:
        k = keys[i]
        found = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    found.extend(
                        buckets.get((int(k[0]) + dx, int(k[1]) + dy, int(k[2]) + dz), ())
                    )
        c = centers[i]
        out = []
        for j in found:
            d = centers[j] - c
            if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= eps2:
                out.append(j)
        return sorted(out)

    labels: list[int | None] = [None] * n
    NOISE = -1
    cid = 0
    for i in range(n):
        if labels[i] is not None:
            continue
        seeds = neighborhood(i)
        if len(seeds) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cid
        queue = list(seeds)
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == NOISE:
                labels[j] = cid  # border point, reclaimed from noise
            if labels[j] is not None:
                continue
            labels[j] = cid
            nj = neighborhood(j)
            if len(nj) >= min_pts:
                queue.extend(nj)
        cid += 1

    clusters = []
    for c in range(cid):
        members = sorted(points[i] for i in range(n) if labels[i] == c)
        centroid = grid.centers(np.asarray(members, dtype=float)).mean(axis=0)
        clusters.append(ContactCluster(members, centroid))
    clusters.sort(key=lambda cl: (-cl.size, cl.member_indices[0]))
    return clusters


def largest_cluster(clusters) -> ContactCluster:
    """Biggest cluster; ties break to the one with the lowest member index."""
    if not clusters:
        raise ValueError("empty contact map")
    return min(clusters, key=lambda cl: (-cl.size, cl.member_indices[0]))
