"""Expert street-clutter features and feature standardization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .geometry import (DenoiseParams, VoxelGrid, build_voxel_grid, count_in_box,
                       knn_denoise, to_street_frame, traverse_segment)
from .scene import STREET, Dataset, PointCloud, StreetMeta

CLUTTER_FEATURES = (
    "log3d", "log1d", "street_width", "clutter_per_link",
    "clutter_per_street", "rx_height", "both_sides",
)
CLUTTER4_FEATURES = ("log3d", "clutter_per_link", "clutter_per_street", "both_sides")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows are links, columns are named features; ``target`` holds path loss in dB."""

    values: np.ndarray
    columns: tuple[str, ...]
    link_ids: tuple[str, ...]
    street_ids: tuple[str, ...]
    target: np.ndarray | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(len(self.link_ids), len(self.columns))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "link_ids", tuple(self.link_ids))
        object.__setattr__(self, "street_ids", tuple(self.street_ids))
        if len(self.street_ids) != len(self.link_ids):
            raise ValueError("street_ids and link_ids lengths differ")
        if self.target is not None:
            t = np.array(self.target, dtype=np.float64).reshape(-1)
            if len(t) != len(self.link_ids):
                raise ValueError("target length does not match row count")
            object.__setattr__(self, "target", t)

    def __len__(self):
        return len(self.link_ids)

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in columns]
        return FeatureMatrix(self.values[:, idx], tuple(columns), self.link_ids, self.street_ids, self.target)

    def drop(self, column: str) -> "FeatureMatrix":
        return self.select([c for c in self.columns if c != column])

    def rows(self, link_ids: Sequence[str]) -> "FeatureMatrix":
        pos = {lid: i for i, lid in enumerate(self.link_ids)}
        idx = [pos[lid] for lid in link_ids]
        return FeatureMatrix(
            self.values[idx], self.columns, [self.link_ids[i] for i in idx],
            [self.street_ids[i] for i in idx], None if self.target is None else self.target[idx])

    def hstack(self, other: "FeatureMatrix") -> "FeatureMatrix":
        if other.link_ids != self.link_ids:
            raise ValueError("row order mismatch")
        return FeatureMatrix(np.hstack([self.values, other.values]), self.columns + other.columns,
                             self.link_ids, self.street_ids, self.target)


# ---------------------------------------------------------------------------
# per-street / per-link clutter


def street_box(street: StreetMeta, furthest_tx_1d: float):
    """Coverage volume of a street: [0, d] x [-w/2, w/2] x [0, h]."""
    lo = (0.0, -street.width / 2.0, 0.0)
    hi = (float(furthest_tx_1d), street.width / 2.0, float(street.rx_height))
    return lo, hi


def clutter_per_street(cloud: PointCloud, street: StreetMeta, furthest_tx_1d: float) -> float:
    """Point density (points per m^3) inside the street's coverage volume."""
    if cloud.frame != STREET:
        raise ValueError("clutter_per_street expects a street-frame cloud")
    if not furthest_tx_1d > 0:
        raise ValueError("zero-volume street box: furthest_tx_1d must be > 0")
    lo, hi = street_box(street, furthest_tx_1d)
    volume = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2])
    if volume <= 0:
        raise ValueError("zero-volume street box")
    return count_in_box(cloud, lo, hi) / volume


def clutter_per_link(grid: VoxelGrid, tx, rx) -> int:
    """Total point count over the 1 m cubes crossed by the Tx-Rx segment."""
    return sum(grid.get(c) for c in traverse_segment(grid, tx, rx))


def prepare_street_clouds(dataset: Dataset, denoise: DenoiseParams | None = DenoiseParams()) -> dict[str, PointCloud]:
    """World-frame clouds -> street frame, then k-NN denoised (when ``denoise`` is set).

    Streets without a cloud get an empty street-frame cloud.
    """
    out = {}
    for sid, scene in dataset.streets.items():
        if scene.cloud is None:
            out[sid] = PointCloud(np.empty((0, 3)), STREET)
            continue
        cloud = scene.cloud if scene.cloud.frame == STREET else to_street_frame(scene.cloud, scene.meta)
        if denoise is not None and len(cloud) > denoise.k:
            cloud = knn_denoise(cloud, denoise)
        out[sid] = cloud
    return out


def assemble_clutter(dataset: Dataset, clouds: Mapping[str, PointCloud]) -> FeatureMatrix:
    """Seven clutter features per link, canonical column order, target = measured PL."""
    missing = [sid for sid in dataset.streets if sid not in clouds]
    if missing:
        raise ValueError(f"missing street cloud(s): {', '.join(missing)}")
    grids: dict[str, VoxelGrid] = {}
    cps: dict[str, float] = {}
    for sid, scene in dataset.streets.items():
        links = dataset.links_for(sid)
        if not links:
            continue
        cloud = clouds[sid]
        if cloud.frame != STREET:
            raise ValueError(f"street {sid}: cloud must be in street frame")
        grids[sid] = build_voxel_grid(cloud)
        cps[sid] = clutter_per_street(cloud, scene.meta, max(lk.d1d for lk in links))

    rows = []
    for lk in dataset.links:
        meta = dataset.streets[lk.street_id].meta
        cpl = clutter_per_link(grids[lk.street_id], lk.tx_position, meta.rx_street_position)
        rows.append([
            math.log10(lk.d3d), math.log10(lk.d1d), meta.width, float(cpl),
            cps[lk.street_id], meta.rx_height, 1.0 if meta.buildings_both_sides else 0.0,
        ])
    return FeatureMatrix(
        np.array(rows, dtype=np.float64).reshape(-1, len(CLUTTER_FEATURES)), CLUTTER_FEATURES,
        [lk.link_id for lk in dataset.links], [lk.street_id for lk in dataset.links],
        [lk.measured_pl for lk in dataset.links])


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True, eq=False)
class StandardScaler:
    means: np.ndarray
    stds: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.stds <= 1e-12 * np.maximum(1.0, np.abs(self.means))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != len(self.means):
            raise ValueError(f"expected {len(self.means)} features, got {X.shape[-1]}")
        const = self.constant
        scale = np.where(const, 1.0, self.stds)
        Z = (X - self.means) / scale
        return np.where(const, 0.0, Z)

    def inverse_transform(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        const = self.constant
        return np.where(const, self.means, Z * np.where(const, 1.0, self.stds) + self.means)


def fit_scaler(train) -> StandardScaler:
    """Per-column mean and population std; constant columns standardize to 0."""
    X = train.values if isinstance(train, FeatureMatrix) else np.asarray(train, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("fit_scaler needs a non-empty 2D matrix")
    return StandardScaler(X.mean(axis=0), X.std(axis=0))


def apply_scaler(scaler: StandardScaler, matrix):
    if isinstance(matrix, FeatureMatrix):
        return FeatureMatrix(scaler.transform(matrix.values), matrix.columns, matrix.link_ids,
                             matrix.street_ids, matrix.target)
    return scaler.transform(matrix)


# ---------------------------------------------------------------------------
# CSV hand-off


def save_features(path, fm: FeatureMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["link_id", "street_id", *fm.columns]
        if fm.target is not None:
            header.append("pl_db")
        w.writerow(header)
        for i, lid in enumerate(fm.link_ids):
            row = [lid, fm.street_ids[i], *(repr(float(v)) for v in fm.values[i])]
            if fm.target is not None:
                row.append(repr(float(fm.target[i])))
            w.writerow(row)


def load_features(path) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty feature file")
    header = rows[0]
    if header[:2] != ["link_id", "street_id"]:
        raise ValueError(f"{path}: header must start with link_id,street_id")
    has_target = header[-1] == "pl_db"
    cols = header[2:-1] if has_target else header[2:]
    body = rows[1:]
    for n, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"{path}:{n}: expected {len(header)} fields")
    vals = np.array([[float(v) for v in r[2:2 + len(cols)]] for r in body]).reshape(-1, len(cols))
    target = np.array([float(r[-1]) for r in body]) if has_target else None
    return FeatureMatrix(vals, cols, [r[0] for r in body], [r[1] for r in body], target)
