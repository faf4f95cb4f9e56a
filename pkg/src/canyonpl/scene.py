"""Domain data model and text-format persistence for street scenes.

Three inputs describe a measurement campaign:

* a links CSV (one Tx-Rx path-loss measurement per row, Tx in street frame),
* a streets CSV (per-street metadata and world-frame pose of the street frame),
* per-street point clouds (``.xyz``) and building footprints (``.fpl``).

All files are UTF-8 text; lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

LINKS_HEADER = ["link_id", "street_id", "tx_x", "tx_y", "tx_z", "d1d", "d3d", "pl_db"]
STREETS_HEADER = [
    "street_id", "width", "rx_height", "both_sides",
    "rx_wx", "rx_wy", "rx_wz", "axis_x", "axis_y",
]
MAX_LINK_DISTANCE = 500.0
WORLD = "world"
STREET = "street"


class SceneFormatError(ValueError):
    """Raised when a scene file is malformed or violates a data invariant."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class LinkRecord:
    link_id: str
    street_id: str
    tx_position: tuple[float, float, float]
    measured_pl: float
    d3d: float
    d1d: float

    def __post_init__(self):
        tx = tuple(float(v) for v in self.tx_position)
        if len(tx) != 3 or not all(math.isfinite(v) for v in tx):
            raise ValueError(f"link {self.link_id}: tx_position must be 3 finite numbers")
        object.__setattr__(self, "tx_position", tx)
        if not math.isfinite(self.measured_pl):
            raise ValueError(f"link {self.link_id}: measured_pl not finite")
        if not (self.d1d > 0):
            raise ValueError(f"link {self.link_id}: d1d must be > 0")
        if self.d3d < self.d1d:
            raise ValueError(f"link {self.link_id}: d3d < d1d")
        if self.d3d > MAX_LINK_DISTANCE:
            raise ValueError(f"link {self.link_id}: d3d {self.d3d} exceeds {MAX_LINK_DISTANCE} m")

    def with_pl(self, pl: float) -> "LinkRecord":
        return LinkRecord(self.link_id, self.street_id, self.tx_position, float(pl), self.d3d, self.d1d)


@dataclass(frozen=True)
class StreetMeta:
    """Per-street metadata.

    ``rx_world_position`` is the world-frame ground point below the receiver;
    it becomes the origin of the street frame, where the receiver itself sits
    at ``(0, 0, rx_height)``. ``street_axis`` is the world-frame unit direction
    that maps to street-frame +X.
    """

    street_id: str
    width: float
    rx_height: float
    buildings_both_sides: bool
    rx_world_position: tuple[float, float, float]
    street_axis: tuple[float, float]

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"street {self.street_id}: width must be > 0")
        if not self.rx_height > 0:
            raise ValueError(f"street {self.street_id}: rx_height must be > 0")
        pos = tuple(float(v) for v in self.rx_world_position)
        axis = tuple(float(v) for v in self.street_axis)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError(f"street {self.street_id}: rx_world_position must be 3 finite numbers")
        if len(axis) != 2 or abs(math.hypot(*axis) - 1.0) > 1e-9:
            raise ValueError(f"street {self.street_id}: street_axis must be a unit 2D vector")
        object.__setattr__(self, "rx_world_position", pos)
        object.__setattr__(self, "street_axis", axis)
        object.__setattr__(self, "buildings_both_sides", bool(self.buildings_both_sides))

    @property
    def rx_street_position(self) -> tuple[float, float, float]:
        return (0.0, 0.0, float(self.rx_height))


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        if self.frame not in (WORLD, STREET):
            raise ValueError(f"unknown frame {self.frame!r}")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.frame == other.frame and np.array_equal(self.points, other.points)


def _segments_cross(p1, p2, q1, q2) -> bool:
    """True when closed segments p1p2 and q1q2 share at least one point."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def polygon_is_simple(vertices: np.ndarray) -> bool:
    """Pairwise edge test: non-adjacent edges must not touch."""
    v = [tuple(p) for p in np.asarray(vertices, dtype=float)]
    m = len(v)
    edges = [(v[i], v[(i + 1) % m]) for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            if j == i + 1 or (i == 0 and j == m - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class BuildingFootprint:
    polygon: np.ndarray
    height: float

    def __post_init__(self):
        poly = np.array(self.polygon, dtype=np.float64).reshape(-1, 2)
        if len(poly) < 3:
            raise ValueError("footprint needs at least 3 vertices")
        if not np.all(np.isfinite(poly)):
            raise ValueError("footprint has non-finite vertices")
        if not (self.height > 0 and math.isfinite(self.height)):
            raise ValueError("footprint height must be > 0")
        if not polygon_is_simple(poly):
            raise ValueError("footprint polygon is self-intersecting")
        poly.flags.writeable = False
        object.__setattr__(self, "polygon", poly)
        object.__setattr__(self, "height", float(self.height))

    def __eq__(self, other):
        if not isinstance(other, BuildingFootprint):
            return NotImplemented
        return self.height == other.height and np.array_equal(self.polygon, other.polygon)


@dataclass(frozen=True)
class StreetScene:
    meta: StreetMeta
    cloud: PointCloud | None = None
    footprints: tuple[BuildingFootprint, ...] = ()

    @property
    def street_id(self) -> str:
        return self.meta.street_id


@dataclass(frozen=True)
class Dataset:
    streets: Mapping[str, StreetScene]
    links: tuple[LinkRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        streets = dict(self.streets)
        for sid, scene in streets.items():
            if scene.street_id != sid:
                raise ValueError(f"street key {sid!r} does not match scene id {scene.street_id!r}")
        links = tuple(self.links)
        seen = set()
        dups = []
        for link in links:
            if link.street_id not in streets:
                raise ValueError(f"link {link.link_id}: unknown street_id {link.street_id!r}")
            if link.link_id in seen:
                dups.append(link.link_id)
            seen.add(link.link_id)
        if dups:
            raise ValueError(f"duplicate link_id(s): {', '.join(sorted(set(dups)))}")
        object.__setattr__(self, "streets", streets)
        object.__setattr__(self, "links", links)

    @property
    def street_ids(self) -> list[str]:
        return list(self.streets)

    def links_for(self, street_id: str) -> list[LinkRecord]:
        return [lk for lk in self.links if lk.street_id == street_id]

    def link_ids(self) -> list[str]:
        return [lk.link_id for lk in self.links]

    def with_links(self, links: Iterable[LinkRecord]) -> "Dataset":
        return Dataset(self.streets, tuple(links))


# ---------------------------------------------------------------------------
# parsing helpers


def _content_lines(path):
    """Yield (line_number, stripped_text) for non-blank, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            yield lineno, text


def _parse_float(token: str, path, lineno: int, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SceneFormatError(f"non-numeric {name} {token!r}", path, lineno) from None
    if not math.isfinite(value):
        raise SceneFormatError(f"non-finite {name} {token!r}", path, lineno)
    return value


def _csv_rows(path, header: Sequence[str]):
    lines = _content_lines(path)
    try:
        lineno, text = next(lines)
    except StopIteration:
        raise SceneFormatError("missing header", path) from None
    got = next(csv.reader([text]))
    if [h.strip() for h in got] != list(header):
        raise SceneFormatError(f"bad header {got}, expected {list(header)}", path, lineno)
    for lineno, text in lines:
        row = [c.strip() for c in next(csv.reader([text]))]
        if len(row) != len(header):
            raise SceneFormatError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        yield lineno, dict(zip(header, row))


# ---------------------------------------------------------------------------
# streets


def load_streets(path) -> dict[str, StreetMeta]:
    streets: dict[str, StreetMeta] = {}
    for lineno, row in _csv_rows(path, STREETS_HEADER):
        sid = row["street_id"]
        if not sid:
            raise SceneFormatError("empty street_id", path, lineno)
        if sid in streets:
            raise SceneFormatError(f"duplicate street_id {sid}", path, lineno)
        if row["both_sides"] not in ("0", "1"):
            raise SceneFormatError("both_sides must be 0 or 1", path, lineno)
        vals = {k: _parse_float(row[k], path, lineno, k)
                for k in STREETS_HEADER if k not in ("street_id", "both_sides")}
        try:
            streets[sid] = StreetMeta(
                street_id=sid,
                width=vals["width"],
                rx_height=vals["rx_height"],
                buildings_both_sides=row["both_sides"] == "1",
                rx_world_position=(vals["rx_wx"], vals["rx_wy"], vals["rx_wz"]),
                street_axis=(vals["axis_x"], vals["axis_y"]),
            )
        except ValueError as exc:
            raise SceneFormatError(str(exc), path, lineno) from None
    return streets


def save_streets(path, streets: Iterable[StreetMeta]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STREETS_HEADER)
        for s in streets:
            w.writerow([
                s.street_id, repr(s.width), repr(s.rx_height), int(s.buildings_both_sides),
                *(repr(v) for v in s.rx_world_position), *(repr(v) for v in s.street_axis),
            ])


# ---------------------------------------------------------------------------
# links


def load_links(path, streets: Mapping[str, StreetMeta | StreetScene]) -> tuple[LinkRecord, ...]:
    """Parse and validate a links CSV against known street metadata.

    The stored ``d3d`` must agree with the distance from ``tx`` to the
    receiver at ``(0, 0, rx_height)`` within 1e-6 m.
    """
    links: list[LinkRecord] = []
    seen: dict[str, int] = {}
    for lineno, row in _csv_rows(path, LINKS_HEADER):
        lid, sid = row["link_id"], row["street_id"]
        if not lid:
            raise SceneFormatError("empty link_id", path, lineno)
        if lid in seen:
            raise SceneFormatError(f"duplicate link_id {lid} (first at line {seen[lid]})", path, lineno)
        seen[lid] = lineno
        if sid not in streets:
            raise SceneFormatError(f"unknown street_id {sid!r}", path, lineno)
        meta = streets[sid]
        meta = meta.meta if isinstance(meta, StreetScene) else meta
        v = {k: _parse_float(row[k], path, lineno, k) for k in LINKS_HEADER[2:]}
        if v["d3d"] < v["d1d"]:
            raise SceneFormatError(f"d3d < d1d at line {lineno}", path, lineno)
        tx = (v["tx_x"], v["tx_y"], v["tx_z"])
        d3d = math.dist(tx, meta.rx_street_position)
        if abs(d3d - v["d3d"]) > 1e-6:
            raise SceneFormatError(
                f"stored d3d {v['d3d']} differs from recomputed {d3d:.9f}", path, lineno)
        try:
            links.append(LinkRecord(lid, sid, tx, v["pl_db"], v["d3d"], v["d1d"]))
        except ValueError as exc:
            raise SceneFormatError(str(exc), path, lineno) from None
    return tuple(links)


def save_links(path, links: Iterable[LinkRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LINKS_HEADER)
        for lk in links:
            w.writerow([lk.link_id, lk.street_id, *(repr(c) for c in lk.tx_position),
                        repr(lk.d1d), repr(lk.d3d), repr(lk.measured_pl)])


# ---------------------------------------------------------------------------
# point clouds


def load_pointcloud(path) -> PointCloud:
    pts = []
    for lineno, text in _content_lines(path):
        tokens = text.split()
        if len(tokens) != 3:
            raise SceneFormatError(f"expected 3 coordinates, got {len(tokens)}", path, lineno)
        pts.append([_parse_float(t, path, lineno, "coordinate") for t in tokens])
    return PointCloud(np.array(pts, dtype=np.float64).reshape(-1, 3), WORLD)


def save_pointcloud(path, cloud: PointCloud) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in cloud.points.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")


# ---------------------------------------------------------------------------
# footprints


def load_footprints(path) -> list[BuildingFootprint]:
    """Parse ``height; x1,y1 x2,y2 ...`` records, one polygon per line."""
    out = []
    for lineno, text in _content_lines(path):
        if ";" not in text:
            raise SceneFormatError("expected 'height; x1,y1 x2,y2 ...'", path, lineno)
        head, body = text.split(";", 1)
        height = _parse_float(head.strip(), path, lineno, "height")
        if height <= 0:
            raise SceneFormatError(f"height must be > 0, got {height}", path, lineno)
        verts = []
        for tok in body.split():
            parts = tok.split(",")
            if len(parts) != 2:
                raise SceneFormatError(f"bad vertex {tok!r}", path, lineno)
            verts.append([_parse_float(p, path, lineno, "vertex") for p in parts])
        if len(verts) < 3:
            raise SceneFormatError(f"polygon needs >= 3 vertices, got {len(verts)}", path, lineno)
        if not polygon_is_simple(np.array(verts)):
            raise SceneFormatError("self-intersecting polygon", path, lineno)
        out.append(BuildingFootprint(np.array(verts), height))
    return out


def save_footprints(path, footprints: Iterable[BuildingFootprint]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for fp in footprints:
            verts = " ".join(f"{x!r},{y!r}" for x, y in fp.polygon.tolist())
            fh.write(f"{fp.height!r}; {verts}\n")


# ---------------------------------------------------------------------------
# whole datasets


def save_dataset(directory, dataset: Dataset) -> None:
    """Write ``streets.csv``, ``links.csv`` and per-street ``.xyz``/``.fpl`` files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_streets(d / "streets.csv", [s.meta for s in dataset.streets.values()])
    save_links(d / "links.csv", dataset.links)
    for sid, scene in dataset.streets.items():
        if scene.cloud is not None:
            if scene.cloud.frame != WORLD:
                raise ValueError(f"street {sid}: only world-frame clouds are persisted")
            save_pointcloud(d / f"{sid}.xyz", scene.cloud)
        save_footprints(d / f"{sid}.fpl", scene.footprints)


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    metas = load_streets(d / "streets.csv")
    links = load_links(d / "links.csv", metas)
    scenes = {}
    for sid, meta in metas.items():
        xyz, fpl = d / f"{sid}.xyz", d / f"{sid}.fpl"
        cloud = load_pointcloud(xyz) if xyz.exists() else None
        fps = tuple(load_footprints(fpl)) if fpl.exists() else ()
        scenes[sid] = StreetScene(meta, cloud, fps)
    return Dataset(scenes, links)
