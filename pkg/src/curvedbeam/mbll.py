"""Differential modified Beer-Lambert estimates, back-projection and upsampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, GeometryError
from .phantom import Channel

UPSAMPLE_FACTOR = 32
CORRECTION_MODES = ("differential", "corrected")


def optical_density(i_source_ref, i_detected):
    """Attenuation ``ln(I_s / I_d)`` (natural log)."""
    i_s = np.asarray(i_source_ref, dtype=float)
    i_d = np.asarray(i_detected, dtype=float)
    if np.any(i_s <= 0) or np.any(i_d <= 0):
        raise DomainError("intensities must be positive")
    out = np.log(i_s / i_d)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChannelEstimate:
    channel: Channel
    od: float
    mu_a_est: float
    is_reference: bool = False


def select_reference(separations, ods, detector_indices=None) -> int:
    """Position of the reference channel within one source group.

    Shortest separation wins; ties go to the lowest OD, then the lowest
    detector index.
    """
    seps = np.round(np.asarray(separations, dtype=float), 9)
    ods = np.asarray(ods, dtype=float)
    if seps.size == 0:
        raise ValueError("cannot select a reference from an empty group")
    det = np.arange(seps.size) if detector_indices is None else np.asarray(detector_indices)
    return int(np.lexsort((det, ods, seps))[0])


def estimate_mu_a(i_ref, i_j, L_j, correction_mode: str = "differential", L_ref=None, mu_o=None):
    """Absorption of channel ``j`` relative to the reference channel.

    ``differential`` mode drops the reference term; ``corrected`` adds back
    ``L_ref * mu_o`` before dividing by ``L_j``.
    """
    L_j = np.asarray(L_j, dtype=float)
    if np.any(L_j <= 0):
        raise DomainError("path length must be positive")
    delta = optical_density(i_ref, i_j)
    if correction_mode == "differential":
        out = delta / L_j
    elif correction_mode == "corrected":
        if L_ref is None or mu_o is None:
            raise ValueError("corrected mode needs L_ref and mu_o")
        out = (delta + L_ref * mu_o) / L_j
    else:
        raise ValueError(f"unknown correction mode {correction_mode!r}")
    return out if np.ndim(out) else float(out)


def grid_nodes(shape, extent):
    """Physical ``(x, y)`` coordinates of raw-grid nodes spanning ``extent``.

    Rows run along y and columns along x.
    """
    n_r, n_c = shape
    w, h = extent
    return np.linspace(0.0, w, n_c), np.linspace(0.0, h, n_r)


def points_to_cells(points, shape, extent) -> tuple[np.ndarray, np.ndarray]:
    """Nearest raw-grid node ``(row, col)`` for each ``(x, y)`` point."""
    pts = np.asarray(points, dtype=float)
    n_r, n_c = shape
    w, h = extent
    tol = 1e-6
    if (np.any(pts[:, 0] < -tol) or np.any(pts[:, 0] > w + tol)
            or np.any(pts[:, 1] < -tol) or np.any(pts[:, 1] > h + tol)):
        raise GeometryError("curve sample lies outside the grid extent")
    col = np.rint(pts[:, 0] / w * (n_c - 1)).astype(int)
    row = np.rint(pts[:, 1] / h * (n_r - 1)).astype(int)
    return np.clip(row, 0, n_r - 1), np.clip(col, 0, n_c - 1)


def backproject(values, cell_lists, shape, fill=None):
    """Average channel values over the cells their curves touch.

    ``cell_lists`` holds one ``(rows, cols)`` pair per value. A cell is
    counted once per channel however many samples land in it; values are
    accumulated in list order. Untouched cells get ``fill``, defaulting
    to the smallest positive value.
    """
    total = np.zeros(shape)
    count = np.zeros(shape, dtype=np.int64)
    for v, (rows, cols) in zip(values, cell_lists):
        flat = np.unique(np.ravel_multi_index((rows, cols), shape))
        np.add.at(total.reshape(-1), flat, v)
        np.add.at(count.reshape(-1), flat, 1)
    if fill is None:
        vals = np.asarray(values, dtype=float)
        pos = vals[vals > 0]
        fill = float(pos.min()) if pos.size else 0.0
    raw = np.full(shape, float(fill))
    hit = count > 0
    raw[hit] = total[hit] / count[hit]
    return raw, count


def catmull_rom_matrix(n: int, factor: int) -> np.ndarray:
    """Weights mapping ``n`` knots to ``(n - 1) * factor + 1`` samples.

    End knots are extended linearly, so linear data is reproduced exactly.
    """
    if n < 2:
        raise DimensionError("need at least two knots per axis")
    m = (n - 1) * factor + 1
    W = np.zeros((m, n))
    for k in range(m):
        i, r = divmod(k, factor)
        if r == 0:
            W[k, i] = 1.0
            continue
        t = r / factor
        w = np.array([(-t + 2 * t ** 2 - t ** 3), (2 - 5 * t ** 2 + 3 * t ** 3),
                      (t + 4 * t ** 2 - 3 * t ** 3), (-t ** 2 + t ** 3)]) * 0.5
        for j, wj in zip((i - 1, i, i + 1, i + 2), w):
            if j < 0:  # p[-1] = 2 p[0] - p[1]
                W[k, 0] += 2 * wj
                W[k, 1] -= wj
            elif j > n - 1:  # p[n] = 2 p[n-1] - p[n-2]
                W[k, n - 1] += 2 * wj
                W[k, n - 2] -= wj
            else:
                W[k, j] += wj
    return W


def cubic_upsample(raw_grid, factor: int = UPSAMPLE_FACTOR) -> np.ndarray:
    """Separable Catmull-Rom upsampling inserting ``factor - 1`` values per gap."""
    raw = np.asarray(raw_grid, dtype=float)
    if raw.ndim != 2 or min(raw.shape) < 2:
        raise DimensionError(f"raw grid must be at least 2x2, got {raw.shape}")
    if factor < 1:
        raise ValueError("factor must be >= 1")
    Wr = catmull_rom_matrix(raw.shape[0], factor)
    Wc = catmull_rom_matrix(raw.shape[1], factor)
    out = Wr @ raw @ Wc.T
    # knots are exact by construction; restore them in case BLAS reorders sums
    out[::factor, ::factor] = raw
    return out


@dataclass(frozen=True, eq=False)
class AbsorptionMap2D:
    """Reconstructed absorption at one depth.

    ``raw_grid`` rows run along y and columns along x; nodes span the
    cross-section bounding box ``extent = (width, height)``.
    """

    raw_grid: np.ndarray
    hit_counts: np.ndarray
    upsampled_grid: np.ndarray
    depth_z: float
    extent: tuple[float, float]
    factor: int = UPSAMPLE_FACTOR

    @property
    def shape(self):
        return self.upsampled_grid.shape

    def coords(self):
        """``(x, y)`` node coordinates of the upsampled grid."""
        return grid_nodes(self.upsampled_grid.shape, self.extent)
