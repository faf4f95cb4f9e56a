"""Point-cloud preprocessing and spatial indexing.

Street frame: origin at the ground point below the receiver, +X along the
street axis, +Y across the street (right-handed, Z up).
Cubes are 1 m, half-open: point p belongs to cube (floor(px), floor(py), floor(pz)).
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .scene import STREET, WORLD, PointCloud, StreetMeta

Cube = tuple[int, int, int]


@dataclass(frozen=True)
class DenoiseParams:
    k: int = 16
    alpha: float = 2.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")


def _rotation(street: StreetMeta) -> np.ndarray:
    ax, ay = street.street_axis
    return np.array([[ax, ay, 0.0], [-ay, ax, 0.0], [0.0, 0.0, 1.0]])


def to_street_frame(cloud: PointCloud, street: StreetMeta) -> PointCloud:
    if cloud.frame != WORLD:
        raise ValueError("cloud is already in street frame")
    origin = np.asarray(street.rx_world_position)
    pts = (cloud.points - origin) @ _rotation(street).T
    return PointCloud(pts, STREET)


def from_street_frame(cloud: PointCloud, street: StreetMeta) -> PointCloud:
    """Inverse of :func:`to_street_frame`."""
    if cloud.frame != STREET:
        raise ValueError("cloud is not in street frame")
    pts = cloud.points @ _rotation(street) + np.asarray(street.rx_world_position)
    return PointCloud(pts, WORLD)


def knn_mean_distances(points: np.ndarray, k: int) -> np.ndarray:
    """Mean distance from each point to its k nearest other points."""
    tree = cKDTree(points, balanced_tree=True, compact_nodes=True)
    dist, _ = tree.query(points, k=k + 1)
    # column 0 is the query point itself (or a coincident duplicate at distance 0)
    return dist[:, 1:].mean(axis=1)


def knn_denoise(cloud: PointCloud, params: DenoiseParams = DenoiseParams()) -> PointCloud:
    """Statistical outlier removal.

    A point is dropped when its mean k-NN distance exceeds
    ``mean + alpha * std`` of those distances over the whole cloud
    (population std). Survivors keep their input order.
    """
    n = len(cloud)
    if n == 0:
        raise ValueError("cannot denoise an empty cloud")
    if params.k >= n:
        raise ValueError(f"k={params.k} must be smaller than the point count {n}")
    md = knn_mean_distances(cloud.points, params.k)
    thr = md.mean() + params.alpha * md.std()
    # slack absorbs summation-order rounding on perfectly uniform clouds
    keep = md <= thr + 1e-12 * max(1.0, abs(thr))
    return PointCloud(cloud.points[keep], cloud.frame)


@dataclass(frozen=True)
class VoxelGrid:
    counts: dict = field(default_factory=dict)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))

    def get(self, cube: Cube) -> int:
        return self.counts.get(cube, 0)


def cube_indices(points: np.ndarray, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    return np.floor(np.asarray(points, dtype=float).reshape(-1, 3) - np.asarray(origin)).astype(np.int64)


def build_voxel_grid(cloud: PointCloud, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    if cloud.frame != STREET:
        raise ValueError("voxel grids are built on street-frame clouds")
    if len(cloud) == 0:
        return VoxelGrid({}, tuple(origin))
    idx = cube_indices(cloud.points, origin)
    keys, counts = np.unique(idx, axis=0, return_counts=True)
    table = {tuple(int(v) for v in key): int(c) for key, c in zip(keys.tolist(), counts.tolist())}
    return VoxelGrid(table, tuple(float(v) for v in origin))


def traverse_segment(grid: VoxelGrid | None, a, b) -> list[Cube]:
    """Cubes crossed with positive length by the open segment (a, b), from a to b.

    Incremental grid stepping (one boundary crossing per step). When the
    segment passes exactly through a cube edge or corner, all tied axes step
    together so that cubes touched in a single point are not reported.
    Crossing times that agree in floating point are re-ranked in exact
    rational arithmetic. Cube membership is half-open, matching
    :func:`build_voxel_grid`.
    """
    origin = (0.0, 0.0, 0.0) if grid is None else tuple(float(v) for v in grid.origin)
    a0 = [float(v) for v in np.asarray(a, dtype=float).reshape(3)]
    b0 = [float(v) for v in np.asarray(b, dtype=float).reshape(3)]
    if a0 == b0:
        raise ValueError("degenerate segment: a == b")
    fa_ = [Fraction(v) - Fraction(o) for v, o in zip(a0, origin)]
    fd = [Fraction(v) - Fraction(w) for v, w in zip(b0, a0)]

    cell = [0, 0, 0]
    last = [0, 0, 0]
    step = [0, 0, 0]
    for i in range(3):
        ai, bi = fa_[i], fa_[i] + fd[i]
        lo, hi = math.floor(ai), math.floor(bi)
        if fd[i] > 0:
            cell[i], step[i] = lo, 1
            last[i] = hi - 1 if bi == hi else hi
        elif fd[i] < 0:
            cell[i], step[i] = (lo - 1 if ai == lo else lo), -1
            last[i] = hi
        else:
            cell[i] = last[i] = lo
    remaining = [abs(last[i] - cell[i]) for i in range(3)]
    af = [float(v) for v in fa_]
    df = [float(v) for v in fd]

    def crossing(i):
        boundary = cell[i] + 1 if step[i] > 0 else cell[i]
        return (boundary - af[i]) / df[i]

    def exact_crossing(i):
        boundary = cell[i] + 1 if step[i] > 0 else cell[i]
        return (boundary - fa_[i]) / fd[i]

    out = [tuple(cell)]
    while remaining[0] or remaining[1] or remaining[2]:
        live = [i for i in range(3) if remaining[i]]
        t = {i: crossing(i) for i in live}
        tmin = min(t.values())
        near = [i for i in live if t[i] - tmin <= 1e-9 * max(1.0, abs(tmin))]
        if len(near) > 1:
            exact = {i: exact_crossing(i) for i in near}
            emin = min(exact.values())
            near = [i for i in near if exact[i] == emin]
        for i in near:  # X, then Y, then Z
            cell[i] += step[i]
            remaining[i] -= 1
        out.append(tuple(cell))
    return out


def count_in_box(source, lo, hi) -> int:
    """Points p with lo <= p < hi componentwise.

    ``source`` may be a PointCloud, an (n, 3) array or a VoxelGrid; for grids
    a cube is counted when its lower corner lies in the box, which is exact
    for integer-aligned boxes.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not np.all(lo < hi):
        raise ValueError(f"inverted or empty box: lo={lo.tolist()} hi={hi.tolist()}")
    if isinstance(source, VoxelGrid):
        total = 0
        o = np.asarray(source.origin)
        for cube, c in source.counts.items():
            corner = np.asarray(cube, dtype=float) + o
            if np.all(corner >= lo) and np.all(corner < hi):
                total += c
        return total
    pts = source.points if isinstance(source, PointCloud) else np.asarray(source, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return 0
    inside = np.all((pts >= lo) & (pts < hi), axis=1)
    return int(inside.sum())
