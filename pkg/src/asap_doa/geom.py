"""Array geometry, spherical coordinates and sphere sampling.

Conventions used throughout the package:

* azimuth is measured in degrees from the +x axis towards +y, wrapped into
  [-180, 180);
* elevation is measured in degrees up from the array plane, in [0, 90];
* microphone and pair indices are 0-based.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

POLE_TOL = 1e-12
HEMISPHERE_TOL = 1e-12


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def wrap_azimuth(az):
    """Wrap an azimuth in degrees into [-180, 180)."""
    w = (az + 180.0) % 360.0 - 180.0
    # (x % 360) can round up to exactly 360 for tiny negative x
    if w >= 180.0:
        w -= 360.0
    return w


@dataclass(frozen=True)
class Direction:
    """A direction of arrival in degrees."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        object.__setattr__(self, "azimuth", float(wrap_azimuth(float(self.azimuth))))
        object.__setattr__(self, "elevation", float(min(90.0, max(0.0, float(self.elevation)))))

    def __str__(self):
        return f"azimuth={self.azimuth:.4f} elevation={self.elevation:.4f}"


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in meters, one row per microphone."""

    mic_positions: np.ndarray
    radius: float = float("nan")

    def __post_init__(self):
        pos = _frozen(self.mic_positions)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("mic_positions must have shape (M, 3)")
        if pos.shape[0] < 2:
            raise ValueError("an array needs at least two microphones")
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        if np.any(d[np.triu_indices(len(pos), 1)] <= 0.0):
            raise ValueError("microphone positions must be pairwise distinct")
        object.__setattr__(self, "mic_positions", pos)

    @property
    def num_mics(self):
        return self.mic_positions.shape[0]

    @property
    def pairs(self):
        """All (l, m) index pairs with l < m, in row-major order."""
        return [(l, m) for l in range(self.num_mics) for m in range(l + 1, self.num_mics)]


def build_uca(num_mics, radius):
    """Uniform circular array in the z = 0 plane; mic 0 sits on the +x axis."""
    if int(num_mics) != num_mics or num_mics < 2:
        raise ValueError(f"num_mics must be an integer >= 2, got {num_mics!r}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    angles = 2.0 * np.pi * np.arange(int(num_mics)) / int(num_mics)
    pos = np.stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros_like(angles)], axis=1)
    return ArrayGeometry(pos, float(radius))


def dir_to_unit(d):
    az = math.radians(d.azimuth)
    el = math.radians(d.elevation)
    return np.array([math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)])


def dirs_to_units(azimuth_deg, elevation_deg):
    """Vectorised `dir_to_unit` over arrays of angles (no wrapping/clamping)."""
    az = np.radians(np.asarray(azimuth_deg, dtype=float))
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    az, el = np.broadcast_arrays(az, el)
    return np.stack([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)], axis=-1)


def unit_to_dir(u):
    """Inverse of `dir_to_unit` on the closed upper hemisphere.

    At the pole the azimuth is undefined and reported as 0.
    """
    u = np.asarray(u, dtype=float)
    n = np.linalg.norm(u)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"expected a unit vector, got norm {n:.9g}")
    x, y, z = u
    if z < -1e-9:
        raise ValueError(f"direction below the array plane (z={z:.3g})")
    el = math.degrees(math.atan2(z, math.hypot(x, y)))
    if z >= 1.0 - POLE_TOL:
        return Direction(0.0, el)
    return Direction(math.degrees(math.atan2(y, x)), el)


def elevation_deg(units):
    """Elevation in degrees of each row of an (n, 3) array of unit vectors."""
    u = np.atleast_2d(units)
    return np.degrees(np.arctan2(u[:, 2], np.hypot(u[:, 0], u[:, 1])))


# ---------------------------------------------------------------------------
# icosphere

def _icosahedron():
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    return verts, faces


def _unique_edges(faces):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0, return_inverse=True)


def _subdivide(verts, faces):
    edges, inv = _unique_edges(faces)
    inv = inv.ravel() + len(verts)
    mid = verts[edges[:, 0]] + verts[edges[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    nf = len(faces)
    ab, bc, ca = inv[:nf], inv[nf:2 * nf], inv[2 * nf:]
    a, b, c = faces.T
    new_faces = np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([b, bc, ab], axis=1),
        np.stack([c, ca, bc], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    return np.vstack([verts, mid]), new_faces


@functools.lru_cache(maxsize=None)
def _mesh(level):
    if level == 0:
        return _icosahedron()
    return _subdivide(*_mesh(level - 1))


@functools.lru_cache(maxsize=None)
def mean_edge_angle(level):
    """Mean great-circle edge length (radians) of the full icosphere mesh."""
    verts, faces = _mesh(level)
    edges, _ = _unique_edges(faces)
    dots = np.einsum("ij,ij->i", verts[edges[:, 0]], verts[edges[:, 1]])
    return float(np.mean(np.arccos(np.clip(dots, -1.0, 1.0))))


@dataclass(frozen=True)
class DirectionGrid:
    """Icosphere vertices at one subdivision level.

    Vertex order is stable: every vertex of level l keeps its index at level
    l + 1 (new midpoints are appended), and hemisphere filtering preserves
    relative order.
    """

    level: int
    vertices: np.ndarray = field(repr=False)
    hemisphere_only: bool

    def __len__(self):
        return len(self.vertices)


@functools.lru_cache(maxsize=None)
def build_icosphere(level, hemisphere_only=True):
    if int(level) != level or not 1 <= level <= 7:
        raise ValueError(f"level must be an integer in [1, 7], got {level!r}")
    verts, _ = _mesh(int(level))
    if hemisphere_only:
        verts = verts[verts[:, 2] >= -HEMISPHERE_TOL]
    return DirectionGrid(int(level), _frozen(verts), bool(hemisphere_only))


# ---------------------------------------------------------------------------
# caps, strips, slerp

@dataclass(frozen=True)
class SphericalCap:
    center: np.ndarray
    half_angle: float

    def __post_init__(self):
        c = _frozen(self.center)
        if c.shape != (3,) or abs(np.linalg.norm(c) - 1.0) > 1e-9:
            raise ValueError("cap center must be a unit 3-vector")
        if not 0.0 < self.half_angle <= math.pi:
            raise ValueError(f"cap half angle must lie in (0, pi], got {self.half_angle!r}")
        object.__setattr__(self, "center", c)


def cap_contains(cap, u):
    return math.acos(min(1.0, max(-1.0, float(np.dot(cap.center, u))))) <= cap.half_angle


def caps_mask(centers, half_angle, units):
    """Boolean mask of rows of `units` lying in any cap of the given centers."""
    dots = np.clip(np.atleast_2d(units) @ np.atleast_2d(centers).T, -1.0, 1.0)
    return np.any(np.arccos(dots) <= half_angle, axis=1)


@dataclass(frozen=True)
class StripSet:
    """Union of elevation bands |elevation - center| <= half_width (degrees)."""

    centers: tuple
    half_width: float

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        if not centers:
            raise ValueError("a strip set needs at least one center")
        if any(not 0.0 <= c <= 90.0 for c in centers):
            raise ValueError("strip centers must lie in [0, 90] degrees")
        if not self.half_width > 0:
            raise ValueError("strip half width must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "half_width", float(self.half_width))

    def mask(self, units):
        el = elevation_deg(units)
        c = np.asarray(self.centers)
        return np.any(np.abs(el[:, None] - c[None, :]) <= self.half_width, axis=1)


def in_strips(strips, u):
    return bool(strips.mask(u)[0])


class DegenerateArcError(ValueError):
    """Raised when interpolating between (nearly) antipodal vectors."""


def slerp(u1, u2, t):
    """Spherical linear interpolation; `t` may be a scalar or an array."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    alpha = math.acos(min(1.0, max(-1.0, float(np.dot(u1, u2)))))
    t_arr = np.asarray(t, dtype=float)
    if alpha <= 1e-9:
        return np.broadcast_to(u1, t_arr.shape + (3,)).copy()
    if alpha >= math.pi - 1e-9:
        raise DegenerateArcError("great circle through antipodal points is undefined")
    s = math.sin(alpha)
    w1 = np.sin((1.0 - t_arr) * alpha) / s
    w2 = np.sin(t_arr * alpha) / s
    return w1[..., None] * u1 + w2[..., None] * u2
