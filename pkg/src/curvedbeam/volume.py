"""Stacking of per-depth maps into a 3-D volume."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .mbll import AbsorptionMap2D

DEFAULT_PLANES = 33


@dataclass(frozen=True, eq=False)
class Volume3D:
    """``grid[k]`` is the plane at height ``planes_z[k]``."""

    depths_in: np.ndarray
    slices_in: np.ndarray
    planes_z: np.ndarray
    grid: np.ndarray
    extent: tuple[float, float]

    @property
    def z_extent(self) -> tuple[float, float]:
        return float(self.depths_in[0]), float(self.depths_in[-1])

    def plane_at(self, z: float) -> np.ndarray:
        return _interp_plane(self.depths_in, self.slices_in, z)


def _interp_plane(depths, slices, z):
    k = int(np.searchsorted(depths, z, side="right")) - 1
    k = min(max(k, 0), len(depths) - 2)
    z0, z1 = depths[k], depths[k + 1]
    if z == z0:
        return slices[k].copy()
    if z == z1:
        return slices[k + 1].copy()
    w = (z - z0) / (z1 - z0)
    return slices[k] + w * (slices[k + 1] - slices[k])


def stack_and_interpolate(slices, n_z_out: int = DEFAULT_PLANES, extent=None) -> Volume3D:
    """Linear interpolation in z between per-depth maps.

    ``slices`` is a sequence of :class:`AbsorptionMap2D` or ``(depth, grid)``
    pairs. Output planes are equally spaced over ``[min depth, max depth]``.
    """
    pairs = []
    for s in slices:
        if isinstance(s, AbsorptionMap2D):
            pairs.append((float(s.depth_z), np.asarray(s.upsampled_grid, dtype=float)))
            extent = extent or s.extent
        else:
            z, g = s
            pairs.append((float(z), np.asarray(g, dtype=float)))
    if len(pairs) < 2:
        raise ValueError("need at least two slices")
    shapes = {g.shape for _, g in pairs}
    if len(shapes) != 1:
        raise DimensionError(f"slices have differing shapes {sorted(shapes)}")
    pairs.sort(key=lambda p: p[0])
    depths = np.array([z for z, _ in pairs])
    if np.any(np.diff(depths) <= 0):
        raise ValueError(f"duplicate depths {depths.tolist()}")
    if n_z_out < len(pairs):
        raise ValueError(f"n_z_out={n_z_out} is smaller than the number of slices")
    stack = np.stack([g for _, g in pairs])
    planes = np.linspace(depths[0], depths[-1], n_z_out)
    planes[0], planes[-1] = depths[0], depths[-1]
    grid = np.stack([_interp_plane(depths, stack, z) for z in planes])
    return Volume3D(depths, stack, planes, grid, tuple(extent) if extent else (1.0, 1.0))
