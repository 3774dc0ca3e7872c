"""Parametric synthetic road scenes.

Scenes are rendered by exact ray casting against the road surface
z = a*sin(2*pi*y / wavelength), so images, depth maps and lane polylines
come from one geometry and stay mutually consistent. Everything is a pure
function of (config, index).
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..geometry import CameraRig
from ..types import Lane3D

ROAD_GRAY = 0.32
MARK_GRAY = 0.92
SKY_TOP = 0.78
SKY_HORIZON = 0.55
DEPTH_REF = 4.0  # meters mapping to inverse depth 1.0


@dataclass(frozen=True)
class SceneConfig:
    image_size: tuple = (256, 512)
    lane_count: tuple = (2, 5)
    lane_spacing: float = 3.5
    heading_range: tuple = (-0.02, 0.02)
    curve2_range: tuple = (-1.5e-3, 1.5e-3)   # 1/m
    curve3_range: tuple = (-6e-6, 6e-6)       # 1/m^2
    slope_amplitude: tuple = (0.0, 2.0)       # meters, sign randomized
    slope_wavelength: tuple = (70.0, 140.0)
    mark_width: float = 0.18
    texture_noise: float = 0.06
    y_near: float = 3.0
    y_far: float = 103.0
    gt_step: float = 0.5
    cam_height: tuple = (1.4, 1.6)
    cam_pitch_deg: tuple = (1.5, 4.0)
    cam_yaw_deg: tuple = (-2.0, 2.0)
    cam_roll_deg: tuple = (-0.5, 0.5)
    focal_scale: tuple = (0.9, 1.1)
    principal_jitter: float = 4.0
    supersample: int = 2
    seed: int = 0


@dataclass(frozen=True)
class Sample:
    image: np.ndarray          # (H, W, 3) uint8
    depth: np.ndarray          # (H, W) float32 normalized inverse depth
    lanes: tuple               # tuple[Lane3D]
    rig: CameraRig
    id: str                    # content hash

    def image_float(self):
        return self.image.astype(np.float32) / 255.0


def _hash_noise(ix, iy, seed):
    """Deterministic uniform [0,1) lattice noise from integer coordinates."""
    h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
         ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
         ^ np.uint64(seed) * np.uint64(0x165667B19E3779F9))
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(x, y, seed, scale=1.0):
    """Smooth road-frame texture noise in [0,1), bilinear between 1 m knots."""
    xs = np.asarray(x, dtype=np.float64) / scale
    ys = np.asarray(y, dtype=np.float64) / scale
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    v00 = _hash_noise(x0, y0, seed)
    v01 = _hash_noise(x0 + 1, y0, seed)
    v10 = _hash_noise(x0, y0 + 1, seed)
    v11 = _hash_noise(x0 + 1, y0 + 1, seed)
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


@dataclass(frozen=True)
class LaneLayout:
    offsets: np.ndarray
    heading: float
    curve2: float
    curve3: float
    amp: float
    wavelength: float
    y_near: float
    y_far: float

    def lane_x(self, lane_idx, ys):
        ys = np.asarray(ys, dtype=np.float64)
        return (self.offsets[lane_idx] + self.heading * ys
                + self.curve2 * ys ** 2 + self.curve3 * ys ** 3)

    def surface_z(self, ys):
        if self.amp == 0.0:
            return np.zeros_like(np.asarray(ys, dtype=np.float64))
        return self.amp * np.sin(2.0 * np.pi * np.asarray(ys, dtype=np.float64) / self.wavelength)


def sample_layout(config, rng):
    n = int(rng.integers(config.lane_count[0], config.lane_count[1] + 1))
    base = (np.arange(n) - (n - 1) / 2.0) * config.lane_spacing
    offsets = base + rng.uniform(-0.3, 0.3, size=n)
    amp = float(rng.uniform(*config.slope_amplitude)) * (1 if rng.random() < 0.5 else -1)
    return LaneLayout(
        offsets=offsets,
        heading=float(rng.uniform(*config.heading_range)),
        curve2=float(rng.uniform(*config.curve2_range)),
        curve3=float(rng.uniform(*config.curve3_range)),
        amp=amp,
        wavelength=float(rng.uniform(*config.slope_wavelength)),
        y_near=config.y_near,
        y_far=config.y_far,
    )


def sample_rig(config, rng):
    h, w = config.image_size
    focal = w * float(rng.uniform(*config.focal_scale))
    return CameraRig.from_params(
        fx=focal,
        fy=focal,
        cx=w / 2.0 + float(rng.uniform(-config.principal_jitter, config.principal_jitter)),
        cy=h / 2.0 + float(rng.uniform(-config.principal_jitter, config.principal_jitter)),
        image_size=config.image_size,
        roll_deg=float(rng.uniform(*config.cam_roll_deg)),
        pitch_deg=float(rng.uniform(*config.cam_pitch_deg)),
        yaw_deg=float(rng.uniform(*config.cam_yaw_deg)),
        position=(0.0, 0.0, float(rng.uniform(*config.cam_height))),
    )


def _ray_directions(rig, ss):
    """Road-frame directions for supersampled pixel centers, z_cam-normalized."""
    h, w = rig.image_size
    step = 1.0 / ss
    us = (np.arange(w * ss) + 0.5) * step - 0.5
    vs = (np.arange(h * ss) + 0.5) * step - 0.5
    ug, vg = np.meshgrid(us, vs)
    pix = np.stack([ug.ravel(), vg.ravel(), np.ones(ug.size)], axis=0)
    d_cam = np.linalg.solve(rig.intrinsics, pix)
    d_road = (rig.rotation.T @ d_cam).T
    return d_road


def render_ground_view(rig, ground_fn, amp=0.0, wavelength=100.0, ss=2, seed=0):
    """Render the surface z = amp*sin(2*pi*y/wavelength) under `rig`.

    ground_fn(x, y) -> (M, 3) colors in [0, 1] for surface points.
    Returns (image float (H, W, 3), depth_t (H, W) ray depth along the
    optical axis, -1 for sky). Depth is the supersample mean of hit rays.
    """
    h, w = rig.image_size
    dirs = _ray_directions(rig, ss)
    t = kernels.march_ground_profile(rig.translation, dirs, amp, wavelength,
                                     t_max=max(320.0, 2.5 * wavelength),
                                     coarse_step=0.5)
    hit = t > 0
    pts = rig.translation[None, :] + t[:, None] * dirs
    colors = np.empty((t.size, 3))
    # sky gradient by pixel row
    rows = np.repeat(np.arange(h * ss), w * ss) / max(1, h * ss - 1)
    skyv = SKY_TOP + (SKY_HORIZON - SKY_TOP) * rows
    colors[:] = skyv[:, None]
    if hit.any():
        colors[hit] = ground_fn(pts[hit, 0], pts[hit, 1])
    img = colors.reshape(h, ss, w, ss, 3).mean(axis=(1, 3))
    tsum = np.where(hit, t, 0.0).reshape(h, ss, w, ss).sum(axis=(1, 3))
    cnt = hit.reshape(h, ss, w, ss).sum(axis=(1, 3))
    tmean = np.where(cnt > 0, tsum / np.maximum(cnt, 1), -1.0)
    return np.clip(img, 0.0, 1.0), tmean


def scene_ground_fn(layout, config, noise_seed):
    def fn(x, y):
        base = ROAD_GRAY + config.texture_noise * (
            2.0 * value_noise(x, y, noise_seed, scale=1.0) - 1.0
        )
        col = np.repeat(base[:, None], 3, axis=1)
        # slight warm tint so the color CRF potential sees 3 channels
        col[:, 2] *= 0.97
        col[:, 0] *= 1.02
        dist = np.full(x.shape, np.inf)
        for i in range(layout.offsets.size):
            dist = np.minimum(dist, np.abs(x - layout.lane_x(i, y)))
        mark = dist <= config.mark_width / 2.0
        mark &= (y >= layout.y_near) & (y <= layout.y_far)
        col[mark] = MARK_GRAY
        return np.clip(col, 0.0, 1.0)

    return fn


def generate_scene(config, index):
    """Deterministic Sample for (config.seed, index)."""
    rng = np.random.default_rng([config.seed, int(index)])
    layout = sample_layout(config, rng)
    rig = sample_rig(config, rng)
    noise_seed = int(rng.integers(0, 2 ** 31))
    img, tmap = render_ground_view(
        rig, scene_ground_fn(layout, config, noise_seed),
        amp=layout.amp, wavelength=layout.wavelength,
        ss=config.supersample, seed=noise_seed,
    )
    with np.errstate(divide="ignore"):
        inv = np.where(tmap > 0, DEPTH_REF / np.maximum(tmap, 1e-9), 0.0)
    depth = np.clip(inv, 0.0, 1.0).astype(np.float32)
    image8 = np.round(img * 255.0).astype(np.uint8)

    ys = np.arange(config.y_near, config.y_far + 1e-9, config.gt_step)
    zs = layout.surface_z(ys)
    lanes = tuple(
        Lane3D(np.column_stack([layout.lane_x(i, ys), ys, zs]))
        for i in range(layout.offsets.size)
    )
    sid = _content_hash(image8, depth, lanes, rig)
    return Sample(image=image8, depth=depth, lanes=lanes, rig=rig, id=sid)


def _content_hash(image8, depth, lanes, rig):
    h = hashlib.sha256()
    h.update(image8.tobytes())
    h.update(depth.tobytes())
    for lane in lanes:
        h.update(lane.points.tobytes())
    h.update(rig.to_config_text().encode())
    return h.hexdigest()


def rasterize_gt(lanes, grid):
    """Rasterize lanes onto the BEV grid.

    Returns dict with confidence (0/1), x_offset (cell units), height (m)
    and instance (int, 0 = background) rasters. Where two lanes claim one
    cell the nearer-to-ego lane (smaller starting y, then lower index) wins.
    """
    rows, cols = grid.shape
    conf = np.zeros((rows, cols), np.float32)
    offset = np.zeros((rows, cols), np.float32)
    height = np.zeros((rows, cols), np.float32)
    inst = np.zeros((rows, cols), np.int32)

    order = sorted(range(len(lanes)), key=lambda i: (lanes[i].points[0, 1], i))
    ycenters = grid.row_centers()
    xcenters = grid.col_centers()
    for rank, li in enumerate(order):
        lane = lanes[li]
        y0, y1 = lane.y_span
        rsel = np.where((ycenters >= y0) & (ycenters <= y1))[0]
        if rsel.size == 0:
            continue
        xs = lane.x_at(ycenters[rsel])
        zs = lane.z_at(ycenters[rsel])
        for r, x, z in zip(rsel, xs, zs):
            c = grid.col_of_x(x)
            if c is None or inst[r, c] != 0:
                continue
            conf[r, c] = 1.0
            offset[r, c] = np.float32((x - xcenters[c]) / grid.dx)
            height[r, c] = np.float32(z)
            inst[r, c] = li + 1
    return {"confidence": conf, "x_offset": offset, "height": height, "instance": inst}
