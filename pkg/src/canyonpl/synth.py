"""Seeded synthetic street scenes with a known path-loss generator.

Each street is laid out in its own street frame (Rx ground point at the
origin, street along +X), populated with clutter objects inside the road
corridor, lined with rectangular buildings just outside it, and then placed
in the world with a random pose. Clutter objects are dense point blobs:
trees as ellipsoids, lampposts as vertical lines, vehicles as boxes. A small
fraction of uniformly scattered points stands in for scanner noise.

Clutter density is specified per street as the target number of points per
cubic meter of the street's coverage volume, which is what the
clutter-per-street feature measures after denoising.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .clutter import FeatureMatrix
from .geometry import from_street_frame
from .scene import (MAX_LINK_DISTANCE, STREET, BuildingFootprint, Dataset, LinkRecord,
                    PointCloud, StreetMeta, StreetScene, save_dataset)

UE_HEIGHT = 1.5
SIDEWALK_INSET = 2.0  # Tx line sits this far inside the curb-to-curb half width
OBJECT_SHARES = {"tree": 0.6, "vehicle": 0.3, "lamp": 0.1}


@dataclass(frozen=True)
class SceneConfig:
    n_streets: int = 13
    length_range: tuple[float, float] = (100.0, 250.0)
    width_range: tuple[float, float] = (15.0, 38.0)
    rx_height_range: tuple[float, float] = (15.0, 54.0)
    links_range: tuple[int, int] = (49, 131)
    density_range: tuple[float, float] = (0.5, 5.0)  # clutter points per m^3
    both_sides_prob: float = 0.85
    building_height_range: tuple[float, float] = (11.0, 72.0)
    outlier_fraction: float = 0.002
    min_link_distance: float = 10.0
    densities: tuple[float, ...] | None = None  # explicit per-street override

    def __post_init__(self):
        if int(self.n_streets) != self.n_streets or self.n_streets < 1:
            raise ValueError("n_streets must be a positive integer")
        for name in ("length_range", "width_range", "rx_height_range", "links_range",
                     "density_range", "building_height_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 0 <= low <= high, got {(lo, hi)}")
        if self.width_range[0] <= 2 * SIDEWALK_INSET:
            raise ValueError(f"street width must exceed {2 * SIDEWALK_INSET} m")
        if self.rx_height_range[0] <= 0:
            raise ValueError("rx height must be > 0")
        if self.length_range[1] > MAX_LINK_DISTANCE:
            raise ValueError(f"street length must not exceed {MAX_LINK_DISTANCE} m")
        if self.links_range[0] < 1:
            raise ValueError("each street needs at least one link")
        if not self.min_link_distance > 0 or self.min_link_distance >= self.length_range[0]:
            raise ValueError("links would fall beyond the street length: "
                             "min_link_distance must be in (0, shortest length)")
        if not 0 <= self.both_sides_prob <= 1 or not 0 <= self.outlier_fraction < 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.densities is not None:
            if len(self.densities) != self.n_streets or min(self.densities) < 0:
                raise ValueError("densities needs one non-negative value per street")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown scene config key(s): {sorted(extra)}")
        conv = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**conv)


@dataclass(frozen=True)
class GroundTruthPL:
    A: float = 46.9
    n: float = 3.1
    beta_street: float = 2.0      # dB per (point / m^3)
    beta_link: float = 0.05       # dB per point on the direct path
    gamma_canyon: float = -3.0    # dB when buildings line both sides
    noise_sigma: float = 3.0      # dB
    saturation_db: float = 0.0    # optional nonlinear clutter term, off when 0
    saturation_scale: float = 20.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.saturation_scale > 0:
            raise ValueError("saturation_scale must be > 0")


@dataclass
class StreetLayout:
    """Street-frame geometry as generated (before the world pose)."""

    meta: StreetMeta
    length: float
    density: float
    points: np.ndarray
    footprints_street: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# clutter objects


def _ellipsoid(rng, center, radii, count):
    u = rng.normal(size=(count, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = rng.random(count) ** (1.0 / 3.0)
    return center + u * r[:, None] * radii


def _box(rng, lo, hi, count):
    return lo + rng.random((count, 3)) * (np.asarray(hi) - np.asarray(lo))


def _lamp(rng, x, y, height, count):
    z = rng.random(count) * height
    jitter = rng.normal(scale=0.05, size=(count, 2))
    return np.column_stack([x + jitter[:, 0], y + jitter[:, 1], z])


def _clutter_points(rng, length, width, rx_height, n_points):
    """Clutter objects spread along both curbs; ``n_points`` in total."""
    if n_points <= 0:
        return np.empty((0, 3))
    half = width / 2.0
    parts = []
    for kind, share in OBJECT_SHARES.items():
        total = int(round(share * n_points))
        n_obj = max(1, int(length / {"tree": 12.0, "vehicle": 15.0, "lamp": 30.0}[kind]))
        counts = rng.multinomial(total, np.full(n_obj, 1.0 / n_obj))
        for c in counts:
            if c == 0:
                continue
            side = 1.0 if rng.random() < 0.5 else -1.0
            x = rng.uniform(1.0, length - 1.0)
            if kind == "tree":
                cz = min(rng.uniform(4.0, 7.0), rx_height - 3.0)
                radii = np.array([rng.uniform(1.5, 3.0), rng.uniform(1.5, 2.5), rng.uniform(1.5, 3.0)])
                cy = side * (half - 1.0)
                parts.append(_ellipsoid(rng, np.array([x, cy, cz]), radii, c))
            elif kind == "vehicle":
                cy = side * (half - 3.5)
                lo = np.array([x - 2.25, cy - 0.9, 0.0])
                parts.append(_box(rng, lo, lo + np.array([4.5, 1.8, 1.5]), c))
            else:
                parts.append(_lamp(rng, x, side * (half - 0.5), min(8.0, rx_height - 1.0), c))
    pts = np.vstack(parts)
    return pts


def _buildings(rng, length, width, both_sides, height_range):
    """Rectangular footprints (street frame) lining one or both curbs."""
    half = width / 2.0
    sides = (1.0, -1.0) if both_sides else (1.0 if rng.random() < 0.5 else -1.0,)
    out = []
    for side in sides:
        x = -20.0
        while x < length + 10.0:
            run = rng.uniform(15.0, 40.0)
            depth = rng.uniform(10.0, 30.0)
            setback = rng.uniform(0.0, 1.5)
            y0 = half + setback
            ys = (y0, y0 + depth) if side > 0 else (-y0 - depth, -y0)
            poly = np.array([[x, ys[0]], [x + run, ys[0]], [x + run, ys[1]], [x, ys[1]]])
            out.append((poly, float(rng.uniform(*height_range))))
            x += run + rng.uniform(0.0, 6.0)
    return out


def _links(rng, sid, length, width, rx_height, n_links, d_min):
    half_in = width / 2.0 - SIDEWALK_INSET
    links = []
    dz = rx_height - UE_HEIGHT
    x_max = min(length, math.sqrt(MAX_LINK_DISTANCE ** 2 - half_in ** 2 - dz ** 2))
    if x_max <= d_min:
        raise ValueError(f"street {sid}: no room for links between {d_min} and {x_max:.1f} m")
    xs = np.sort(rng.uniform(d_min, x_max, n_links))
    sides = np.where(rng.random(n_links) < 0.5, 1.0, -1.0)
    for k, (x, s) in enumerate(zip(xs.tolist(), sides.tolist())):
        tx = (x, s * half_in, UE_HEIGHT)
        d3d = math.dist(tx, (0.0, 0.0, rx_height))
        links.append(LinkRecord(f"{sid}-L{k:03d}", sid, tx, 0.0, d3d, x))
    return links


def _pose(rng):
    theta = rng.uniform(0.0, 2.0 * math.pi)
    origin = (float(rng.uniform(-2000, 2000)), float(rng.uniform(-2000, 2000)), 0.0)
    return origin, (math.cos(theta), math.sin(theta))


# ---------------------------------------------------------------------------
# public API


def street_id(k: int) -> str:
    return f"S{k + 1:02d}"


def generate_street(config: SceneConfig, seed: int, k: int):
    rng = np.random.default_rng([seed, k])
    sid = street_id(k)
    length = float(rng.uniform(*config.length_range))
    width = float(rng.uniform(*config.width_range))
    rx_h = float(rng.uniform(*config.rx_height_range))
    both = bool(rng.random() < config.both_sides_prob)
    lo, hi = config.links_range
    n_links = int(rng.integers(lo, hi + 1))
    density = (float(config.densities[k]) if config.densities is not None
               else float(rng.uniform(*config.density_range)))
    origin, axis = _pose(rng)
    meta = StreetMeta(sid, width, rx_h, both, origin, axis)

    links = _links(rng, sid, length, width, rx_h, n_links, config.min_link_distance)
    reach = max(lk.d1d for lk in links)
    n_points = int(round(density * reach * width * rx_h))
    pts = _clutter_points(rng, reach, width, rx_h, n_points)
    n_out = int(round(config.outlier_fraction * len(pts)))
    if n_out:
        outliers = _box(rng, np.array([0.0, -width / 2, 0.0]), np.array([reach, width / 2, rx_h]), n_out)
        pts = np.vstack([pts, outliers])
    fps = _buildings(rng, length, width, both, config.building_height_range)

    layout = StreetLayout(meta, length, density, pts, fps)
    world = from_street_frame(PointCloud(pts, STREET), meta)
    R = np.array([[axis[0], -axis[1]], [axis[1], axis[0]]])
    footprints = tuple(BuildingFootprint(poly @ R.T + np.array(origin[:2]), h) for poly, h in fps)
    return StreetScene(meta, world, footprints), links, layout


def generate_scene(config: SceneConfig = SceneConfig(), seed: int = 0):
    """Dataset (path loss left at 0) plus the street-frame layouts, keyed by street id."""
    scenes, links, layouts = {}, [], {}
    for k in range(config.n_streets):
        scene, lks, layout = generate_street(config, seed, k)
        scenes[scene.street_id] = scene
        links.extend(lks)
        layouts[scene.street_id] = layout
    return Dataset(scenes, tuple(links)), layouts


def generate_pl(dataset: Dataset, features: FeatureMatrix, truth: GroundTruthPL, seed: int = 0) -> Dataset:
    """Fill ``measured_pl`` from the feature-linear generator plus seeded Gaussian noise."""
    need = ("clutter_per_street", "clutter_per_link", "both_sides")
    missing = [c for c in need if c not in features.columns]
    if missing:
        raise ValueError(f"features missing column(s): {missing}")
    row = {lid: i for i, lid in enumerate(features.link_ids)}
    absent = [lk.link_id for lk in dataset.links if lk.link_id not in row]
    if absent:
        raise ValueError(f"no features for {len(absent)} link(s), e.g. {absent[0]}")
    cps = features.values[:, features.columns.index("clutter_per_street")]
    cpl = features.values[:, features.columns.index("clutter_per_link")]
    both = features.values[:, features.columns.index("both_sides")]
    rng = np.random.default_rng([seed, 2])
    noise = rng.normal(0.0, truth.noise_sigma, len(dataset.links)) if truth.noise_sigma > 0 else \
        np.zeros(len(dataset.links))
    out = []
    for k, lk in enumerate(dataset.links):
        i = row[lk.link_id]
        pl = (truth.A + 10.0 * truth.n * math.log10(lk.d3d) + truth.beta_street * cps[i]
              + truth.beta_link * cpl[i] + truth.gamma_canyon * both[i])
        if truth.saturation_db:
            pl += truth.saturation_db * (1.0 - math.exp(-cpl[i] / truth.saturation_scale))
        out.append(lk.with_pl(pl + noise[k]))
    return dataset.with_links(out)


def write_scene(directory, dataset: Dataset, truth: GroundTruthPL | None = None,
                config: SceneConfig | None = None, seed: int | None = None) -> None:
    """Scene files in the standard layout plus a ``generator.json`` record."""
    os.makedirs(directory, exist_ok=True)
    save_dataset(directory, dataset)
    record = {"seed": seed,
              "config": None if config is None else asdict(config),
              "truth": None if truth is None else asdict(truth)}
    with open(os.path.join(directory, "generator.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
