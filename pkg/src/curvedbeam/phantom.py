"""Phantoms, inclusions, optode layouts and source-detector channels.

Coordinates are in cm. The measurement plane is x-y with the origin at the
lower-left corner of the cross-section bounding box; z is measured upward
from the bottom face of the phantom.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GeometryError, LayoutTooDenseError, OutOfDomainError

SHAPES = ("rectangular", "cylindrical", "slab")
BOUNDARY_TOL = 1e-6
MIN_OPTODE_SPACING = 0.1  # cm


@dataclass(frozen=True)
class CrossSection:
    """Planar cross-section of a phantom: a rectangle or a disk.

    ``extent`` is ``(width, height)`` of the bounding box. Disks are
    inscribed in a square bounding box, so ``width == height == diameter``.
    """

    shape: str
    extent: tuple[float, float]

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if min(self.extent) <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.is_disk and not math.isclose(self.extent[0], self.extent[1]):
            raise ValueError("disk cross-section needs a square bounding box")

    @classmethod
    def from_phantom_extent(cls, shape: str, extent: Sequence[float]) -> "CrossSection":
        if shape == "cylindrical":
            return cls(shape, (float(extent[0]), float(extent[0])))
        return cls(shape, (float(extent[0]), float(extent[1])))

    @property
    def is_disk(self) -> bool:
        return self.shape == "cylindrical"

    @property
    def radius(self) -> float:
        return 0.5 * self.extent[0]

    @property
    def centroid(self) -> np.ndarray:
        return 0.5 * np.asarray(self.extent, dtype=float)

    @property
    def perimeter(self) -> float:
        if self.is_disk:
            return 2.0 * math.pi * self.radius
        return 2.0 * (self.extent[0] + self.extent[1])

    def contains(self, x, y, tol: float = 0.0):
        """Vectorised membership test (boundary included within ``tol``)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_disk:
            cx, cy = self.centroid
            return np.hypot(x - cx, y - cy) <= self.radius + tol
        w, h = self.extent
        return (x >= -tol) & (x <= w + tol) & (y >= -tol) & (y <= h + tol)

    def boundary_distance(self, point) -> float:
        """Unsigned distance from ``point`` to the boundary curve."""
        px, py = map(float, point)
        if self.is_disk:
            cx, cy = self.centroid
            return abs(math.hypot(px - cx, py - cy) - self.radius)
        w, h = self.extent
        if 0.0 <= px <= w and 0.0 <= py <= h:
            return min(px, w - px, py, h - py)
        dx = max(-px, 0.0, px - w)
        dy = max(-py, 0.0, py - h)
        return math.hypot(dx, dy)

    def on_boundary(self, point, tol: float = BOUNDARY_TOL) -> bool:
        return self.boundary_distance(point) <= tol

    def project(self, point) -> np.ndarray:
        """Closest point of the closed cross-section to ``point``."""
        p = np.asarray(point, dtype=float)
        if self.is_disk:
            c = self.centroid
            r = np.hypot(*(p - c))
            if r <= self.radius:
                return p.copy()
            return c + (p - c) * (self.radius / r)
        return np.clip(p, 0.0, self.extent)

    def inward_normal(self, point) -> np.ndarray:
        """Unit normal pointing into the cross-section at a boundary point.

        Rectangle corners use the bisector of the two adjacent sides.
        """
        p = np.asarray(point, dtype=float)
        if self.is_disk:
            v = self.centroid - p
            return v / np.hypot(*v)
        w, h = self.extent
        n = np.zeros(2)
        tol = BOUNDARY_TOL
        if abs(p[0]) <= tol:
            n[0] += 1.0
        if abs(p[0] - w) <= tol:
            n[0] -= 1.0
        if abs(p[1]) <= tol:
            n[1] += 1.0
        if abs(p[1] - h) <= tol:
            n[1] -= 1.0
        norm = np.hypot(*n)
        if norm == 0.0:
            raise GeometryError(f"point {tuple(p)} is not on the rectangle boundary")
        return n / norm

    def boundary_point(self, s: float) -> np.ndarray:
        """Point at arc-length ``s`` along the boundary.

        Disks start at angle 0 (the +x direction) and run counter-clockwise;
        rectangles start at the origin corner and run counter-clockwise.
        """
        if self.is_disk:
            theta = s / self.radius
            c = self.centroid
            return np.array([c[0] + self.radius * math.cos(theta),
                             c[1] + self.radius * math.sin(theta)])
        w, h = self.extent
        s = s % self.perimeter
        if s <= w:
            return np.array([s, 0.0])
        s -= w
        if s <= h:
            return np.array([w, s])
        s -= h
        if s <= w:
            return np.array([w - s, h])
        s -= w
        return np.array([0.0, h - s])


@dataclass(frozen=True)
class Inclusion:
    """Cylindrical inclusion drilled from the top face.

    ``depth_top`` is the drilled depth measured down from the top face;
    ``None`` means the inclusion runs through the full height.
    """

    center: tuple[float, float]
    radius: float
    mu_a: float
    depth_top: float | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"inclusion radius must be positive, got {self.radius}")
        if self.mu_a < 0:
            raise ValueError(f"inclusion mu_a must be non-negative, got {self.mu_a}")
        if self.depth_top is not None and self.depth_top <= 0:
            raise ValueError(f"depth_top must be positive, got {self.depth_top}")

    def z_range(self, height: float) -> tuple[float, float]:
        if self.depth_top is None:
            return (0.0, height)
        return (max(height - self.depth_top, 0.0), height)

    def active_at(self, z: float, height: float) -> bool:
        lo, hi = self.z_range(height)
        return lo <= z <= hi


@dataclass(frozen=True)
class Phantom:
    """Tissue-mimicking phantom with homogeneous background and inclusions.

    ``extent`` is ``(x, y, z)`` for rectangular and slab phantoms and
    ``(diameter, height)`` for cylindrical ones.
    """

    shape: str
    extent: tuple[float, ...]
    mu_a_background: float
    mu_s_prime: float
    inclusions: tuple[Inclusion, ...] = ()

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        expected = 2 if self.shape == "cylindrical" else 3
        if len(self.extent) != expected:
            raise ValueError(f"{self.shape} phantom needs {expected} extents, got {self.extent}")
        if min(self.extent) <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.mu_a_background <= 0 or self.mu_s_prime <= 0:
            raise ValueError("mu_a_background and mu_s_prime must be positive")
        if self.mu_s_prime / self.mu_a_background < 10:
            warnings.warn("mu_s_prime/mu_a < 10: diffusion approximation is doubtful",
                          stacklevel=2)
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        cs = self.cross_section
        for inc in self.inclusions:
            if not _disk_inside(cs, inc.center, inc.radius):
                raise ValueError(f"inclusion at {inc.center} (r={inc.radius}) "
                                 "is not inside the phantom cross-section")
            if inc.mu_a <= self.mu_a_background:
                warnings.warn(f"inclusion at {inc.center} is not more absorbing "
                              "than the background", stacklevel=2)

    @property
    def cross_section(self) -> CrossSection:
        return CrossSection.from_phantom_extent(self.shape, self.extent)

    @property
    def height(self) -> float:
        return self.extent[-1]

    def active_inclusions(self, z: float) -> list[Inclusion]:
        return [inc for inc in self.inclusions if inc.active_at(z, self.height)]


def _disk_inside(cs: CrossSection, center, radius) -> bool:
    cx, cy = map(float, center)
    if cs.is_disk:
        ox, oy = cs.centroid
        return math.hypot(cx - ox, cy - oy) + radius <= cs.radius + BOUNDARY_TOL
    w, h = cs.extent
    return (cx - radius >= -BOUNDARY_TOL and cx + radius <= w + BOUNDARY_TOL
            and cy - radius >= -BOUNDARY_TOL and cy + radius <= h + BOUNDARY_TOL)


def mu_a_grid(phantom: Phantom, x, y, z: float) -> np.ndarray:
    """Absorption sampled at arrays of ``(x, y)`` in the plane at height ``z``.

    Points outside the cross-section are not checked here.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(np.broadcast(x, y).shape, phantom.mu_a_background)
    assigned = np.zeros(out.shape, dtype=bool)
    for inc in phantom.active_inclusions(z):
        inside = np.hypot(x - inc.center[0], y - inc.center[1]) <= inc.radius
        inside &= ~assigned  # first inclusion in list order wins
        out[inside] = inc.mu_a
        assigned |= inside
    return out


def mu_a_at(phantom: Phantom, point) -> float:
    """Ground-truth absorption at ``(x, y, z)``."""
    x, y, z = map(float, point)
    tol = BOUNDARY_TOL
    if not phantom.cross_section.contains(x, y, tol=tol) or not (-tol <= z <= phantom.height + tol):
        raise OutOfDomainError(f"point {(x, y, z)} lies outside the phantom")
    return float(mu_a_grid(phantom, x, y, z))


@dataclass(frozen=True, eq=False)
class OptodeLayout:
    """Source and detector positions on the boundary of a cross-section."""

    cross_section: CrossSection
    sources: np.ndarray
    detectors: np.ndarray
    depth_z: float = 0.0

    def __post_init__(self):
        src = np.array(self.sources, dtype=float).reshape(-1, 2)
        det = np.array(self.detectors, dtype=float).reshape(-1, 2)
        if len(src) == 0 or len(det) == 0:
            raise ValueError("layout needs at least one source and one detector")
        for name, pts in (("source", src), ("detector", det)):
            for p in pts:
                if not self.cross_section.on_boundary(p):
                    raise GeometryError(f"{name} at {tuple(p)} is not on the boundary")
            if len(np.unique(np.round(pts, 9), axis=0)) != len(pts):
                raise ValueError(f"{name} positions must be pairwise distinct")
        src.setflags(write=False)
        det.setflags(write=False)
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "detectors", det)
        object.__setattr__(self, "depth_z", float(self.depth_z))

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    def same_geometry(self, other: "OptodeLayout") -> bool:
        return (self.cross_section == other.cross_section
                and np.array_equal(self.sources, other.sources)
                and np.array_equal(self.detectors, other.detectors))


@dataclass(frozen=True)
class Channel:
    source_index: int
    detector_index: int
    separation_d: float


def build_layout(shape: str, counts: tuple[int, int], phantom_extent: Sequence[float],
                 depth_z: float = 0.0) -> OptodeLayout:
    """Place sources and detectors at equal boundary spacing.

    Sources start at arc-length 0. Detectors are shifted by half of
    ``perimeter / lcm(n_src, n_det)``; every source sits on a multiple of
    that unit and no detector does, so the two sets never coincide.
    """
    n_src, n_det = (int(c) for c in counts)
    if n_src < 1 or n_det < 1:
        raise ValueError(f"optode counts must be >= 1, got {counts}")
    cs = CrossSection.from_phantom_extent(shape, phantom_extent)
    p = cs.perimeter
    step_src, step_det = p / n_src, p / n_det
    if min(step_src, step_det) < MIN_OPTODE_SPACING:
        raise LayoutTooDenseError(
            f"spacing {min(step_src, step_det):.4f} cm is below {MIN_OPTODE_SPACING} cm")
    sources = np.array([cs.boundary_point(k * step_src) for k in range(n_src)])
    shift = 0.5 * p / math.lcm(n_src, n_det)
    detectors = np.array([cs.boundary_point(m * step_det + shift) for m in range(n_det)])
    return OptodeLayout(cs, sources, detectors, depth_z)


def enumerate_channels(layout: OptodeLayout) -> list[Channel]:
    """One channel per (source, detector) pair in lexicographic order.

    Co-located pairs are dropped with a warning.
    """
    channels = []
    dropped = []
    for s, sp in enumerate(layout.sources):
        for d, dp in enumerate(layout.detectors):
            sep = float(math.hypot(*(dp - sp)))
            if sep <= BOUNDARY_TOL:
                dropped.append((s, d))
                continue
            channels.append(Channel(s, d, sep))
    if dropped:
        warnings.warn(f"excluded co-located source/detector pairs: {dropped}", stacklevel=2)
    return channels


# Reference geometries -------------------------------------------------------

BACKGROUND_MU_A = 0.25
BACKGROUND_MU_S_PRIME = 20.0
INK_FULL = 6.76
INK_78 = 5.20
INK_LOW = 2.72


def homogeneous_rectangular() -> Phantom:
    return Phantom("rectangular", (4.4, 4.4, 2.2), BACKGROUND_MU_A, BACKGROUND_MU_S_PRIME)


def numerical_rectangular() -> Phantom:
    """3 x 3 cm square with a 0.5 cm absorber at its centre."""
    return Phantom("rectangular", (3.0, 3.0, 2.2), BACKGROUND_MU_A, BACKGROUND_MU_S_PRIME,
                   (Inclusion((1.5, 1.5), 0.25, INK_FULL),))


def numerical_cylindrical(radius: float = 0.4) -> Phantom:
    """6 cm disk with a strong and a weak absorber."""
    return Phantom("cylindrical", (6.0, 3.0), BACKGROUND_MU_A, BACKGROUND_MU_S_PRIME,
                   (Inclusion((1.5, 4.0), radius, INK_78), Inclusion((4.5, 3.0), radius, INK_LOW)))


def wax_rectangular() -> Phantom:
    """4.4 x 4.4 x 2.2 cm block with two inclusions drilled 1.5 cm deep."""
    return Phantom("rectangular", (4.4, 4.4, 2.2), BACKGROUND_MU_A, BACKGROUND_MU_S_PRIME,
                   (Inclusion((2.47, 1.70), 0.20, INK_FULL, depth_top=1.5),
                    Inclusion((1.10, 3.30), 0.25, INK_FULL, depth_top=1.5)))


def wax_cylindrical() -> Phantom:
    """4.75 cm diameter cylinder with one inclusion drilled 2.0 cm deep."""
    return Phantom("cylindrical", (4.75, 3.5), BACKGROUND_MU_A, BACKGROUND_MU_S_PRIME,
                   (Inclusion((3.20, 2.50), 0.35, INK_78, depth_top=2.0),))


def slab(absorber_radius: float = 0.4, absorber_depth: float = 0.6) -> Phantom:
    """Transverse section of a 4.4 cm wide, 2 cm thick, 5 cm long slab.

    The absorber strip runs the full length (z) of the slab, centred in x,
    with its axis ``absorber_depth`` below the top face (y = 2).
    """
    return Phantom("slab", (4.4, 2.0, 5.0), BACKGROUND_MU_A, BACKGROUND_MU_S_PRIME,
                   (Inclusion((2.2, 2.0 - absorber_depth), absorber_radius, INK_FULL),))


def slab_layout(offset: float = 1.0) -> OptodeLayout:
    """Source ``offset`` cm right of the absorber, detectors ``offset`` cm either side."""
    cs = slab().cross_section
    top = cs.extent[1]
    x_src = 0.5 * cs.extent[0] + offset
    return OptodeLayout(cs, [(x_src, top)],
                        [(x_src - offset, top), (x_src + offset, top)], depth_z=2.5)
