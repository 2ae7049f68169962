"""Voxel grids with physical spacing: volumes, binary masks and spherical VOIs.

Arrays are indexed ``data[x, y, z]``. A voxel's physical position is the
position of its *center*; ``origin`` is the center of voxel (0, 0, 0) in mm.
Flat serialization order is x-fastest (Fortran order of the ``[x, y, z]``
array), matching the on-disk layout in :mod:`perinodular.mhd`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

MIN_VOI_RADIUS_MM = 6.0


@dataclass(frozen=True)
class Spacing:
    """Physical voxel size in mm along x, y, z."""

    sx: float
    sy: float
    sz: float

    def __post_init__(self):
        if not (self.sx > 0 and self.sy > 0 and self.sz > 0):
            raise ValueError(f"spacing must be positive, got {(self.sx, self.sy, self.sz)}")

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))

    @classmethod
    def of(cls, value) -> "Spacing":
        if isinstance(value, Spacing):
            return value
        if np.isscalar(value):
            return cls(float(value), float(value), float(value))
        sx, sy, sz = value
        return cls(float(sx), float(sy), float(sz))

    @property
    def voxel_volume(self) -> float:
        """Volume of one voxel in mm^3."""
        return self.sx * self.sy * self.sz


@dataclass(frozen=True)
class Volume:
    """A 3-D scalar grid with physical geometry.

    ``data`` has shape (nx, ny, nz) and is frozen after construction, so
    instances can be shared freely across threads.
    """

    data: np.ndarray
    spacing: Spacing
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-D array, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty volume")
        arr = self._coerce(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", Spacing.of(self.spacing))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    def _coerce(self, arr: np.ndarray) -> np.ndarray:
        return np.array(arr, copy=True)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def index_to_mm(self, indices) -> np.ndarray:
        """Physical centers (mm) of voxel indices, shape (..., 3)."""
        idx = np.asarray(indices, dtype=float)
        sp = np.array(tuple(self.spacing))
        return np.asarray(self.origin) + idx * sp

    def mm_to_index(self, points) -> np.ndarray:
        """Fractional voxel indices of physical points, shape (..., 3)."""
        pts = np.asarray(points, dtype=float)
        sp = np.array(tuple(self.spacing))
        return (pts - np.asarray(self.origin)) / sp

    def same_grid(self, other: "Volume") -> bool:
        return (
            self.shape == other.shape
            and tuple(self.spacing) == tuple(other.spacing)
            and self.origin == other.origin
        )


@dataclass(frozen=True)
class Mask(Volume):
    """A binary grid; ``data`` is boolean."""

    def _coerce(self, arr: np.ndarray) -> np.ndarray:
        if arr.dtype != bool:
            vals = np.unique(arr)
            if not np.isin(vals, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
        return arr.astype(bool)

    def count(self) -> int:
        return int(self.data.sum())

    def physical_volume(self) -> float:
        """Foreground volume in mm^3."""
        return self.count() * self.spacing.voxel_volume


@dataclass(frozen=True)
class SphereVOI:
    """Spherical volume of interest around a nodule centroid."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if self.radius < MIN_VOI_RADIUS_MM:
            raise ValueError(f"VOI radius must be >= {MIN_VOI_RADIUS_MM} mm, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "radius", float(self.radius))


def make_voi(nodule_centroid, nodule_eq_diameter: float,
             min_radius: float = MIN_VOI_RADIUS_MM) -> SphereVOI:
    """Build the VOI for a nodule: radius = equivalent diameter, floored at 6 mm."""
    if nodule_eq_diameter <= 0:
        raise ValueError(f"equivalent diameter must be positive, got {nodule_eq_diameter}")
    return SphereVOI(center=tuple(nodule_centroid), radius=max(float(nodule_eq_diameter), min_radius))


def voi_membership(voi: SphereVOI, grid: Volume) -> Mask:
    """Boolean mask of voxels whose centers lie inside the VOI (inclusive).

    A VOI fully outside the grid yields an all-zero mask.
    """
    nx, ny, nz = grid.shape
    sx, sy, sz = grid.spacing
    ox, oy, oz = grid.origin
    cx, cy, cz = voi.center
    dx2 = (ox + sx * np.arange(nx) - cx) ** 2
    dy2 = (oy + sy * np.arange(ny) - cy) ** 2
    dz2 = (oz + sz * np.arange(nz) - cz) ** 2
    inside = (dx2[:, None, None] + dy2[None, :, None] + dz2[None, None, :]) <= voi.radius ** 2
    return Mask(inside, spacing=grid.spacing, origin=grid.origin)


def resample_isometric(vol: Volume, target_spacing: float, mode: str | None = None) -> Volume:
    """Resample onto an isotropic grid of pitch ``target_spacing`` mm.

    Output dims per axis are round(n * s / t), at least 1, with the origin
    kept at the same physical point. ``mode`` is "trilinear" or "nearest";
    by default masks use nearest-neighbor (so they stay binary) and volumes
    trilinear. Samples falling outside the input grid clamp to the nearest
    edge voxel.
    """
    if target_spacing <= 0:
        raise ValueError(f"target spacing must be positive, got {target_spacing}")
    is_mask = isinstance(vol, Mask)
    if mode is None:
        mode = "nearest" if is_mask else "trilinear"
    if mode not in ("trilinear", "nearest"):
        raise ValueError(f"unknown mode {mode!r}")
    if is_mask and mode == "trilinear":
        raise ValueError("masks must be resampled with nearest-neighbor")

    t = float(target_spacing)
    out_shape = tuple(
        max(1, int(np.floor(n * s / t + 0.5))) for n, s in zip(vol.shape, vol.spacing)
    )
    # output voxel i sits at origin + i*t; its fractional input index is i*t/s
    axes = [np.arange(n) * t / s for n, s in zip(out_shape, vol.spacing)]
    coords = np.meshgrid(*axes, indexing="ij")
    order = 0 if mode == "nearest" else 1
    src = vol.data.astype(np.uint8) if is_mask else vol.data.astype(np.float64)
    out = map_coordinates(src, coords, order=order, mode="nearest")
    cls = Mask if is_mask else Volume
    if not is_mask and np.issubdtype(vol.data.dtype, np.integer):
        out = np.rint(out).astype(vol.data.dtype)
    return cls(out, spacing=Spacing(t, t, t), origin=vol.origin)
