"""Building height maps and per-link facade patches for the autoencoder."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .scene import BuildingFootprint, LinkRecord, StreetMeta

PATCH_LENGTH = 500
PATCH_HALF_WIDTH = 20
PATCH_SHAPE = (PATCH_LENGTH, 2 * PATCH_HALF_WIDTH)


@dataclass(frozen=True, eq=False)
class HeightMap:
    """Building height (m) on 1 m cells in street frame.

    Cell (i, j) covers x in [i, i+1) and y in [y0 + j, y0 + j + 1) with
    ``y0 = -half_width``.
    """

    grid: np.ndarray
    half_width: int = PATCH_HALF_WIDTH

    def __post_init__(self):
        g = np.array(self.grid, dtype=np.float64)
        if g.ndim != 2 or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("height map must be a finite, non-negative 2D array")
        g.flags.writeable = False
        object.__setattr__(self, "grid", g)

    def cell_centers(self):
        xs = np.arange(self.grid.shape[0]) + 0.5
        ys = np.arange(self.grid.shape[1]) - self.half_width + 0.5
        return xs, ys


def _points_in_polygon(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule, vectorized over query points."""
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for xa, ya, xb, yb in zip(x0, y0, x1, y1):
        crosses = (ya > py) != (yb > py)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = xa + (py - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (px < x_at)
    return inside


def footprint_to_street(fp: BuildingFootprint, street: StreetMeta) -> np.ndarray:
    ax, ay = street.street_axis
    ox, oy, _ = street.rx_world_position
    d = fp.polygon - np.array([ox, oy])
    return np.column_stack([d @ np.array([ax, ay]), d @ np.array([-ay, ax])])


def collapse_buildings(footprints: Iterable[BuildingFootprint], street: StreetMeta,
                       length: int = PATCH_LENGTH, half_width: int = PATCH_HALF_WIDTH) -> HeightMap:
    """Max building height covering each cell center; 0 where no building."""
    grid = np.zeros((length, 2 * half_width))
    for fp in footprints:
        poly = footprint_to_street(fp, street)
        # candidate index ranges from the bounding box
        i0 = max(0, math.floor(poly[:, 0].min() - 0.5))
        i1 = min(length, math.ceil(poly[:, 0].max() + 0.5))
        j0 = max(0, math.floor(poly[:, 1].min() + half_width - 0.5))
        j1 = min(2 * half_width, math.ceil(poly[:, 1].max() + half_width + 0.5))
        if i0 >= i1 or j0 >= j1:
            continue
        xs = np.arange(i0, i1) + 0.5
        ys = np.arange(j0, j1) - half_width + 0.5
        PX, PY = np.meshgrid(xs, ys, indexing="ij")
        mask = _points_in_polygon(PX, PY, poly)
        block = grid[i0:i1, j0:j1]
        block[mask] = np.maximum(block[mask], fp.height)
    return HeightMap(grid, half_width)


def facade_patch(height_map: HeightMap, link: LinkRecord) -> np.ndarray:
    """(500, 40) patch in meters: rows below floor(d1d) copied, the rest zero-padded."""
    if not 0 < link.d1d <= PATCH_LENGTH:
        raise ValueError(f"link {link.link_id}: d1d={link.d1d} outside (0, {PATCH_LENGTH}]")
    src = height_map.grid
    if src.shape[1] != PATCH_SHAPE[1]:
        raise ValueError(f"height map must have {PATCH_SHAPE[1]} columns")
    rows = min(int(math.floor(link.d1d)), src.shape[0])
    patch = np.zeros(PATCH_SHAPE)
    patch[:rows] = src[:rows]
    assert patch.shape == PATCH_SHAPE
    return patch


@dataclass(frozen=True, eq=False)
class GridScaler:
    cell_min: np.ndarray
    cell_max: np.ndarray

    def normalize(self, patch) -> np.ndarray:
        p = np.asarray(patch, dtype=np.float64)
        span = self.cell_max - self.cell_min
        degenerate = span <= 0
        out = (p - self.cell_min) / np.where(degenerate, 1.0, span)
        out = np.where(degenerate, 0.0, out)
        return np.clip(out, 0.0, 1.0)

    def denormalize(self, patch) -> np.ndarray:
        p = np.asarray(patch, dtype=np.float64)
        return p * (self.cell_max - self.cell_min) + self.cell_min


def fit_grid_scaler(train_patches: Sequence[np.ndarray] | np.ndarray) -> GridScaler:
    stack = np.asarray(train_patches, dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[None]
    if len(stack) == 0:
        raise ValueError("need at least one training patch")
    return GridScaler(stack.min(axis=0), stack.max(axis=0))


def normalize_patch(scaler: GridScaler, patch) -> np.ndarray:
    return scaler.normalize(patch)


def save_patch_csv(path, patch: np.ndarray) -> None:
    """Flat row-major dump, one value per line."""
    flat = np.asarray(patch, dtype=np.float64).reshape(-1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# shape {PATCH_SHAPE[0]} {PATCH_SHAPE[1]} row-major\n")
        for v in flat.tolist():
            fh.write(f"{v!r}\n")


def load_patch_csv(path) -> np.ndarray:
    vals = [float(t) for t in open(path, encoding="utf-8").read().split("\n")
            if t.strip() and not t.startswith("#")]
    return np.array(vals).reshape(PATCH_SHAPE)
