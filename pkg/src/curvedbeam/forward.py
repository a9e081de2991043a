"""Continuous-wave diffusion forward model on a 2-D finite-volume grid.

Solves ``-div(c grad u) + a u = f`` on the phantom cross-section with the
Robin condition ``u + 2 A c du/dn = 0`` on the boundary. Cells are squares
(or rectangles) of the bounding box; disk phantoms use a staircase mask.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ResolutionError, SolverError
from .phantom import OptodeLayout, Phantom, enumerate_channels, mu_a_grid

logger = logging.getLogger(__name__)

A_REFL_DEFAULT = 2.74
RESIDUAL_TOL = 1e-8
MAX_ITER = 50_000
MIN_NODES = 16


@dataclass(eq=False)
class DiffusionGrid:
    """Cell-centred coefficients of the diffusion operator.

    Arrays are indexed ``[iy, ix]``; cell ``(iy, ix)`` is centred at
    ``(x[ix], y[iy])``.
    """

    nx: int
    ny: int
    hx: float
    hy: float
    diffusion_c: np.ndarray
    absorption_a: np.ndarray
    mask: np.ndarray
    a_refl: float = A_REFL_DEFAULT
    _matrix: sp.csc_matrix | None = field(default=None, repr=False)
    _factor: object = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.hx if np.isclose(self.hx, self.hy) else min(self.hx, self.hy)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def index(self) -> np.ndarray:
        """Unknown number of each inside cell, -1 outside."""
        idx = np.full(self.mask.shape, -1, dtype=np.int64)
        idx[self.mask] = np.arange(int(self.mask.sum()))
        return idx

    def boundary_cells(self) -> np.ndarray:
        """``(iy, ix)`` pairs of inside cells with at least one boundary face."""
        padded = np.pad(self.mask, 1, constant_values=False)
        inner = padded[1:-1, 1:-1]
        exposed = ~(padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
        return np.argwhere(inner & exposed)

    def nearest_cell(self, point, candidates=None) -> tuple[int, int]:
        """Inside cell whose centre is closest to ``point``."""
        cells = np.argwhere(self.mask) if candidates is None else np.asarray(candidates)
        cx = (cells[:, 1] + 0.5) * self.hx
        cy = (cells[:, 0] + 0.5) * self.hy
        k = int(np.argmin((cx - point[0]) ** 2 + (cy - point[1]) ** 2))
        return int(cells[k, 0]), int(cells[k, 1])

    def system_matrix(self) -> sp.csc_matrix:
        if self._matrix is None:
            self._matrix = _assemble_matrix(self)
        return self._matrix


def assemble(phantom: Phantom, depth_z: float, nx: int = 128, ny: int = 128,
             a_refl: float = A_REFL_DEFAULT, helmholtz_a: float | None = None) -> DiffusionGrid:
    """Sample the phantom's optical properties at ``depth_z`` onto an ``ny x nx`` grid.

    ``helmholtz_a`` replaces the per-cell absorption by a constant, for the
    alternative reading of the Helmholtz coefficient.
    """
    if nx < MIN_NODES or ny < MIN_NODES:
        raise ValueError(f"grid needs at least {MIN_NODES} nodes per axis, got {nx}x{ny}")
    cs = phantom.cross_section
    w, h = cs.extent
    hx, hy = w / nx, h / ny
    for inc in phantom.active_inclusions(depth_z):
        if 2 * inc.radius / max(hx, hy) < 3:
            raise ResolutionError(
                f"inclusion of radius {inc.radius} cm spans fewer than 3 cells "
                f"at spacing {max(hx, hy):.4f} cm")
    xc = (np.arange(nx) + 0.5) * hx
    yc = (np.arange(ny) + 0.5) * hy
    X, Y = np.meshgrid(xc, yc)
    mask = cs.contains(X, Y)
    mu_a = mu_a_grid(phantom, X, Y, depth_z)
    c = 1.0 / (3.0 * (mu_a + phantom.mu_s_prime))
    a = np.full_like(mu_a, helmholtz_a) if helmholtz_a is not None else mu_a
    c[~mask] = 0.0
    a = np.where(mask, a, 0.0)
    return DiffusionGrid(nx, ny, hx, hy, c, a, mask, a_refl)


def _face_conductances(grid: DiffusionGrid):
    """Yield ``(cells, neighbours_or_None, conductance)`` for every inside face."""
    m, c = grid.mask, grid.diffusion_c
    # x-faces have length hy and centre distance hx; y-faces the reverse
    for axis, (along, across) in ((1, (grid.hx, grid.hy)), (0, (grid.hy, grid.hx))):
        for shift in (-1, 1):
            nb_mask = np.zeros_like(m)
            nb_c = np.zeros_like(c)
            src = [slice(None), slice(None)]
            dst = [slice(None), slice(None)]
            if shift == 1:
                src[axis], dst[axis] = slice(1, None), slice(None, -1)
            else:
                src[axis], dst[axis] = slice(None, -1), slice(1, None)
            nb_mask[tuple(dst)] = m[tuple(src)]
            nb_c[tuple(dst)] = c[tuple(src)]
            yield axis, shift, along, across, nb_mask, nb_c


def _assemble_matrix(grid: DiffusionGrid) -> sp.csc_matrix:
    m, c = grid.mask, grid.diffusion_c
    idx = grid.index
    n = int(m.sum())
    diag = grid.absorption_a[m] * grid.hx * grid.hy
    rows, cols, vals = [], [], []
    ny, nx = m.shape
    iy, ix = np.nonzero(m)
    for axis, shift, along, across, nb_mask, nb_c in _face_conductances(grid):
        inner = nb_mask[m]
        ci = c[m]
        cj = nb_c[m]
        # harmonic mean between cells, series resistance to the Robin boundary
        with np.errstate(divide="ignore", invalid="ignore"):
            g_inner = across * 2.0 * ci * cj / ((ci + cj) * along)
        g_bound = across / (along / (2.0 * ci) + 2.0 * grid.a_refl)
        g = np.where(inner, g_inner, g_bound)
        diag = diag + g
        niy = iy + (shift if axis == 0 else 0)
        nix = ix + (shift if axis == 1 else 0)
        sel = inner
        rows.append(idx[iy[sel], ix[sel]])
        cols.append(idx[niy[sel], nix[sel]])
        vals.append(-g[sel])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return A


def boundary_outflow(grid: DiffusionGrid, u: np.ndarray) -> float:
    """Total flux leaving through Robin faces for a solved field ``u``."""
    m = grid.mask
    total = 0.0
    for axis, shift, along, across, nb_mask, nb_c in _face_conductances(grid):
        bound = m & ~nb_mask
        ci = grid.diffusion_c[bound]
        g = across / (along / (2.0 * ci) + 2.0 * grid.a_refl)
        total += float(np.sum(g * u[bound]))
    return total


def flux_balance(grid: DiffusionGrid, u: np.ndarray, strength: float = 1.0) -> dict:
    """Split the injected power into absorbed and escaped parts."""
    absorbed = float(np.sum(grid.absorption_a[grid.mask] * u[grid.mask]) * grid.hx * grid.hy)
    escaped = boundary_outflow(grid, u)
    return {"source": strength, "absorbed": absorbed, "escaped": escaped,
            "imbalance": strength - absorbed - escaped}


def solve_fluence(grid: DiffusionGrid, source_node: tuple[int, int], method: str = "direct",
                  tol: float = RESIDUAL_TOL, maxiter: int = MAX_ITER) -> np.ndarray:
    """Fluence for a unit point source in cell ``source_node = (iy, ix)``.

    Returns an ``(ny, nx)`` array with NaN outside the mask. ``method`` is
    ``"direct"`` (sparse LU, factor cached on the grid) or ``"cg"``
    (Jacobi-preconditioned conjugate gradients).
    """
    iy, ix = source_node
    if not grid.mask[iy, ix]:
        raise ValueError(f"source node {source_node} is outside the mask")
    A = grid.system_matrix()
    b = np.zeros(A.shape[0])
    b[grid.index[iy, ix]] = 1.0
    if method == "direct":
        if grid._factor is None:
            grid._factor = spla.splu(A)
        sol = grid._factor.solve(b)
    elif method == "cg":
        M = sp.diags(1.0 / A.diagonal())
        sol, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
        if info != 0:
            res = np.linalg.norm(A @ sol - b) / np.linalg.norm(b)
            raise SolverError(f"CG did not converge in {maxiter} iterations", residual=res)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = np.linalg.norm(A @ sol - b) / np.linalg.norm(b)
    if residual > tol:
        raise SolverError(f"relative residual {residual:.3e} exceeds {tol:.1e}", residual=residual)
    if np.any(sol <= 0):
        raise SolverError("non-positive fluence in solution", residual=residual)
    u = np.full(grid.mask.shape, np.nan)
    u[grid.mask] = sol
    return u


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Detected intensities for every channel of a layout at one depth."""

    layout: OptodeLayout
    source_index: np.ndarray
    detector_index: np.ndarray
    intensity: np.ndarray
    provenance: str = "simulated"

    def __post_init__(self):
        s = np.asarray(self.source_index, dtype=np.int64)
        d = np.asarray(self.detector_index, dtype=np.int64)
        i = np.asarray(self.intensity, dtype=float)
        if not (s.shape == d.shape == i.shape) or s.ndim != 1:
            raise ValueError("source_index, detector_index and intensity must be equal-length 1-D")
        if np.any(~np.isfinite(i)) or np.any(i <= 0):
            raise ValueError("all intensities must be finite and > 0")
        if self.provenance not in ("simulated", "file"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        order = np.lexsort((d, s))
        for name, arr in (("source_index", s), ("detector_index", d), ("intensity", i)):
            arr = arr[order]
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def depth_z(self) -> float:
        return self.layout.depth_z

    def __len__(self):
        return len(self.intensity)

    def lookup(self) -> dict[tuple[int, int], float]:
        return {(int(s), int(d)): float(v) for s, d, v in
                zip(self.source_index, self.detector_index, self.intensity)}

    def scaled(self, gain: float) -> "MeasurementSet":
        """Copy with every intensity multiplied by ``gain`` (detector gain change)."""
        return MeasurementSet(self.layout, self.source_index, self.detector_index,
                              self.intensity * gain, self.provenance)

    def check_complete(self):
        expected = {(c.source_index, c.detector_index) for c in enumerate_channels(self.layout)}
        have = set(zip(self.source_index.tolist(), self.detector_index.tolist()))
        missing = expected - have
        if missing:
            raise ValueError(f"measurement set is missing {len(missing)} channels, "
                             f"e.g. {sorted(missing)[:3]}")


def source_cell(grid: DiffusionGrid, position, mu_s_prime: float, cross_section) -> tuple[int, int]:
    """Cell one transport length inside the boundary along the inward normal."""
    inward = cross_section.inward_normal(position)
    target = np.asarray(position, dtype=float) + inward / mu_s_prime
    return grid.nearest_cell(target)


def simulate_measurements(phantom: Phantom, layout: OptodeLayout, nx: int = 128, ny: int = 128,
                          noise_sigma: float = 0.0, seed: int | None = None,
                          a_refl: float = A_REFL_DEFAULT, helmholtz_a: float | None = None,
                          method: str = "direct") -> MeasurementSet:
    """Synthesize boundary intensities for every channel of ``layout``.

    Each detector reads the fluence of the boundary cell nearest to it.
    Optional multiplicative log-normal noise uses ``numpy.random.default_rng(seed)``.
    """
    if layout.cross_section != phantom.cross_section:
        raise ValueError("layout and phantom cross-sections differ")
    grid = assemble(phantom, layout.depth_z, nx, ny, a_refl=a_refl, helmholtz_a=helmholtz_a)
    bcells = grid.boundary_cells()
    det_cells = [grid.nearest_cell(p, bcells) for p in layout.detectors]
    channels = enumerate_channels(layout)
    by_source: dict[int, list] = {}
    for ch in channels:
        by_source.setdefault(ch.source_index, []).append(ch.detector_index)
    s_idx, d_idx, values = [], [], []
    for s, dets in sorted(by_source.items()):
        node = source_cell(grid, layout.sources[s], phantom.mu_s_prime, layout.cross_section)
        u = solve_fluence(grid, node, method=method)
        for d in dets:
            reading = u[det_cells[d]]
            if not reading > 0:
                raise SolverError(f"non-positive reading for channel ({s}, {d})")
            s_idx.append(s)
            d_idx.append(d)
            values.append(reading)
    intensity = np.asarray(values)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        intensity = intensity * np.exp(noise_sigma * rng.standard_normal(len(intensity)))
    logger.debug("simulated %d channels at z=%.3f", len(intensity), layout.depth_z)
    return MeasurementSet(layout, np.array(s_idx), np.array(d_idx), intensity, "simulated")
