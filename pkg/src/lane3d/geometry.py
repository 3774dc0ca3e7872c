"""Camera models, ground-plane homographies and BEV grid mappings.

Conventions
-----------
Road frame: right-handed, x rightward, y forward from ego, z up; the road
plane is {z = 0}. Camera frame: x right, y down, z along the optical axis.
A camera with zero roll/pitch/yaw looks along +y (road) with its image x
axis aligned to road x. Positive pitch tilts the optical axis down,
positive yaw turns it left (right-handed about +z), roll spins about the
optical axis.

All ground-plane mappings are induced by the plane {z = 0}: projecting a
ground point (x, y, 0) through K [R | -R C] reduces to a 3x3 homography on
(x, y, 1), which is what every warp here is built from.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from . import kernels

# columns = camera axes (right, down, forward) expressed in road coordinates
_A0 = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])


def rotation_from_rpy(roll_deg, pitch_deg, yaw_deg):
    """Rotation matrix (camera <- road) for the convention above."""
    m = Rotation.from_euler("YXZ", [-yaw_deg, -pitch_deg, roll_deg], degrees=True).as_matrix()
    a = _A0 @ m
    return a.T


def rpy_from_rotation(rotation):
    """Inverse of rotation_from_rpy. Returns (roll, pitch, yaw) in degrees."""
    g = _A0.T @ rotation.T
    a, b, c = Rotation.from_matrix(g).as_euler("YXZ", degrees=True)
    return float(c), float(-b), float(-a)


@dataclass(frozen=True)
class CameraRig:
    """Pinhole camera posed relative to the road-ground frame.

    intrinsics: 3x3 upper-triangular, positive focals. rotation maps road
    vectors into the camera frame. translation is the camera origin in road
    coordinates and must sit above the road plane.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image_size: tuple  # (height, width) pixels

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=np.float64)
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if k.shape != (3, 3) or r.shape != (3, 3):
            raise ValueError("intrinsics and rotation must be 3x3")
        if abs(k[1, 0]) > 0 or abs(k[2, 0]) > 0 or abs(k[2, 1]) > 0:
            raise ValueError("intrinsics must be upper-triangular")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValueError("focal lengths must be strictly positive")
        if abs(k[2, 2] - 1.0) > 1e-9:
            raise ValueError("intrinsics must be normalized with K[2,2] = 1")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal within 1e-6")
        if t[2] <= 0:
            raise ValueError(f"camera must sit above the road plane, got z = {t[2]}")
        h, w = self.image_size
        if int(h) <= 0 or int(w) <= 0:
            raise ValueError(f"bad image size {self.image_size}")
        for arr in (k, r, t):
            arr.setflags(write=False)
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "image_size", (int(h), int(w)))

    @classmethod
    def from_params(cls, fx, fy, cx, cy, image_size, roll_deg=0.0, pitch_deg=0.0,
                    yaw_deg=0.0, position=(0.0, 0.0, 1.5)):
        k = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
        return cls(k, rotation_from_rpy(roll_deg, pitch_deg, yaw_deg),
                   np.asarray(position, dtype=np.float64), tuple(image_size))

    def to_config_text(self):
        roll, pitch, yaw = rpy_from_rotation(self.rotation)
        k = self.intrinsics
        t = self.translation
        lines = [
            "# camera rig",
            f"fx: {float(k[0, 0])!r}",
            f"fy: {float(k[1, 1])!r}",
            f"cx: {float(k[0, 2])!r}",
            f"cy: {float(k[1, 2])!r}",
            f"image_height: {self.image_size[0]}",
            f"image_width: {self.image_size[1]}",
            f"roll_deg: {roll!r}",
            f"pitch_deg: {pitch!r}",
            f"yaw_deg: {yaw!r}",
            f"x_m: {float(t[0])!r}",
            f"y_m: {float(t[1])!r}",
            f"z_m: {float(t[2])!r}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config_text(cls, text):
        fields = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ValueError(f"rig config line {lineno}: expected 'key: value', got {raw!r}")
            key, value = (s.strip() for s in line.split(":", 1))
            fields[key] = value
        required = ["fx", "fy", "cx", "cy", "image_height", "image_width",
                    "roll_deg", "pitch_deg", "yaw_deg", "x_m", "y_m", "z_m"]
        missing = [k for k in required if k not in fields]
        if missing:
            raise ValueError(f"rig config missing keys: {missing}")
        f = {k: float(v) for k, v in fields.items()}
        return cls.from_params(
            f["fx"], f["fy"], f["cx"], f["cy"],
            (int(f["image_height"]), int(f["image_width"])),
            roll_deg=f["roll_deg"], pitch_deg=f["pitch_deg"], yaw_deg=f["yaw_deg"],
            position=(f["x_m"], f["y_m"], f["z_m"]),
        )

    def same_as(self, other):
        return (
            np.array_equal(self.intrinsics, other.intrinsics)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
            and self.image_size == other.image_size
        )


def default_virtual_rig(image_size=(576, 1024), pitch_deg=2.5, height=1.5, focal=1000.0):
    """Canonical rig all inputs are warped to; values are config, not mandated."""
    h, w = image_size
    return CameraRig.from_params(focal, focal, w / 2.0, h / 2.0, image_size,
                                 pitch_deg=pitch_deg, position=(0.0, 0.0, height))


def project_points(rig, points):
    """Project road-frame points (N,3) -> (uv (N,2), camera-frame depth (N,))."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = (rig.rotation @ (p - rig.translation).T).T
    q = (rig.intrinsics @ cam.T).T
    z = q[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = q[:, :2] / z[:, None]
    return uv, z


def ray_ground_intersection(pixel, rig):
    """Road point (x, y, 0) seen at `pixel`, or None at/above the horizon."""
    u, v = float(pixel[0]), float(pixel[1])
    d_cam = np.linalg.solve(rig.intrinsics, np.array([u, v, 1.0]))
    d_road = rig.rotation.T @ d_cam
    if d_road[2] >= 0.0:
        return None
    t = -rig.translation[2] / d_road[2]
    p = rig.translation + t * d_road
    return np.array([p[0], p[1], 0.0])


def ground_to_image(rig):
    """3x3 map from homogeneous ground coords (x, y, 1) to homogeneous pixels."""
    r = rig.rotation
    t = -r @ rig.translation
    return rig.intrinsics @ np.column_stack([r[:, 0], r[:, 1], t])


def ground_homography(src, dst):
    """H with dst_pixel ~ H @ src_pixel for any ground point imaged by both."""
    h = ground_to_image(dst) @ np.linalg.inv(ground_to_image(src))
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]
    return h


def _homography_grid(hmat, out_h, out_w):
    """Source sampling coords for each output pixel under hmat (out -> src)."""
    us, vs = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    q = np.stack([us.ravel(), vs.ravel(), np.ones(out_h * out_w)], axis=0)
    s = hmat @ q
    w = s[2]
    bad = np.abs(w) < 1e-12
    w = np.where(bad, 1.0, w)
    xs = s[0] / w
    ys = s[1] / w
    xs[bad] = -1.0
    ys[bad] = -1.0
    return ys, xs


def warp_image(image, hmat, out_size):
    """Inverse-warp `image` so out[p] = image[hmat @ p], bilinear, zero fill."""
    out_h, out_w = out_size
    ys, xs = _homography_grid(hmat, out_h, out_w)
    img = np.asarray(image)
    chw = img.ndim == 3
    planes = img.transpose(2, 0, 1) if chw else img
    vals, _ = kernels.bilinear_sample(planes.astype(img.dtype, copy=False), ys, xs)
    if chw:
        return np.ascontiguousarray(vals.reshape(-1, out_h, out_w).transpose(1, 2, 0))
    return vals.reshape(out_h, out_w)


def warp_to_virtual(image, src, virtual):
    """Resample `image` (taken by src) as the virtual rig would see the ground."""
    img = np.asarray(image)
    if img.shape[:2] != src.image_size:
        raise ValueError(f"image shape {img.shape[:2]} != src.image_size {src.image_size}")
    if src.same_as(virtual):
        return img.copy()
    h_virt_to_src = ground_homography(virtual, src)
    return warp_image(img, h_virt_to_src, virtual.image_size)


@dataclass(frozen=True)
class BevGrid:
    """Regular discretization of the road plane. Row 0 is nearest to ego."""

    x_min: float = -10.0
    x_max: float = 10.0
    y_min: float = 3.0
    y_max: float = 103.0
    dx: float = 0.5
    dy: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("BEV grid must have at least one cell per axis")

    @property
    def rows(self):
        return int(round((self.y_max - self.y_min) / self.dy))

    @property
    def cols(self):
        return int(round((self.x_max - self.x_min) / self.dx))

    @property
    def shape(self):
        return (self.rows, self.cols)

    def cell_to_road(self, r, c):
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"cell ({r}, {c}) outside {self.shape} grid")
        return np.array([self.x_min + (c + 0.5) * self.dx,
                         self.y_min + (r + 0.5) * self.dy, 0.0])

    def road_to_cell(self, x, y):
        c = math.floor((x - self.x_min) / self.dx)
        r = math.floor((y - self.y_min) / self.dy)
        if 0 <= r < self.rows and 0 <= c < self.cols:
            return (r, c)
        return None

    def col_of_x(self, x):
        c = math.floor((x - self.x_min) / self.dx)
        return c if 0 <= c < self.cols else None

    def row_centers(self):
        return self.y_min + (np.arange(self.rows) + 0.5) * self.dy

    def col_centers(self):
        return self.x_min + (np.arange(self.cols) + 0.5) * self.dx

    def center_grid(self):
        """(rows*cols, 3) road-frame centers, row-major."""
        xs = self.col_centers()
        ys = self.row_centers()
        xg, yg = np.meshgrid(xs, ys)
        return np.column_stack([xg.ravel(), yg.ravel(), np.zeros(xg.size)])


def warp_fv_raster_to_bev(raster, rig, grid):
    """Sample a front-view raster at each BEV cell's ground-center projection.

    Returns (bev_raster, valid). Cells whose center projects behind the
    camera or outside the image are invalid and zero-filled.
    """
    img = np.asarray(raster)
    if img.shape[:2] != rig.image_size:
        raise ValueError(f"raster shape {img.shape[:2]} != rig.image_size {rig.image_size}")
    uv, z = project_points(rig, grid.center_grid())
    front = z > 1e-9
    xs = np.where(front, uv[:, 0], -1.0)
    ys = np.where(front, uv[:, 1], -1.0)
    chw = img.ndim == 3
    planes = img.transpose(2, 0, 1) if chw else img
    vals, ok = kernels.bilinear_sample(planes, ys, xs)
    valid = (ok & front).reshape(grid.rows, grid.cols)
    if chw:
        out = vals.reshape(-1, grid.rows, grid.cols).transpose(1, 2, 0)
    else:
        out = vals.reshape(grid.rows, grid.cols)
    return np.ascontiguousarray(out), valid
