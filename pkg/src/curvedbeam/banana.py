"""Rosenbrock banana function, curved photon channels and path lengths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError
from .phantom import Channel, CrossSection, OptodeLayout

ROSENBROCK_COEFF = 100.0
DEFAULT_KAPPA = 0.35
DEFAULT_SAMPLES = 15


@dataclass(frozen=True)
class RosenbrockParams:
    a: float = 1.0
    coefficient: float = ROSENBROCK_COEFF

    @property
    def minimum(self) -> tuple[float, float]:
        return (self.a, self.a ** 2)


def rosenbrock_eval(params: RosenbrockParams, x, y):
    """``coefficient * (y - x^2)^2 + (a - x)^2``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return params.coefficient * (y - x ** 2) ** 2 + (params.a - x) ** 2


def rosenbrock_grad(params: RosenbrockParams, x, y):
    """Analytic gradient ``(df/dx, df/dy)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = params.coefficient
    dfdx = -2.0 * (params.a - x) - 4.0 * k * (y - x ** 2) * x
    dfdy = 2.0 * k * (y - x ** 2)
    return dfdx, dfdy


def valley_depth(t):
    """Normalised depth of the Rosenbrock valley along a chord.

    The valley floor ``y = x^2`` over ``x in [-1, 1]`` is mapped to the
    chord parameter ``t = (x + 1) / 2``; depth ``1 - x^2`` is 0 at both
    optodes and 1 at the apex ``t = 0.5``.
    """
    x = 2.0 * np.asarray(t, dtype=float) - 1.0
    return 1.0 - x ** 2


def dpf(mu_a, mu_s_prime, d):
    """Differential pathlength factor of a homogeneous semi-infinite medium."""
    mu_a, mu_s_prime, d = (np.asarray(v, dtype=float) for v in (mu_a, mu_s_prime, d))
    if np.any(mu_a <= 0) or np.any(mu_s_prime <= 0) or np.any(d <= 0):
        raise DomainError("dpf arguments must all be positive")
    out = 0.5 * np.sqrt(3.0 * mu_s_prime / mu_a) * (1.0 - 1.0 / (1.0 + d * np.sqrt(3.0 * mu_a * mu_s_prime)))
    return out if out.ndim else float(out)


def path_length(mu_a, mu_s_prime, d):
    """Mean photon path length ``d * DPF`` in cm."""
    out = np.asarray(d, dtype=float) * dpf(mu_a, mu_s_prime, d)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True, eq=False)
class BananaCurve:
    source_pt: np.ndarray
    detector_pt: np.ndarray
    kappa: float
    t: np.ndarray
    samples: np.ndarray
    clipped: np.ndarray
    path_length_L: float

    @property
    def separation_d(self) -> float:
        return float(np.hypot(*(self.detector_pt - self.source_pt)))

    @property
    def arc_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.samples, axis=0).T)))

    @property
    def apex(self) -> np.ndarray:
        return self.samples[len(self.samples) // 2]


def chord_normal(cross_section: CrossSection, s, d) -> np.ndarray:
    """Unit normal to the chord ``s -> d`` pointing into the cross-section.

    Chords through the centroid have no preferred side; they take the
    left-hand normal of the ``s -> d`` direction.
    """
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    chord = d - s
    length = np.hypot(*chord)
    if length <= 1e-12:
        raise GeometryError("zero-length chord: source and detector coincide")
    left = np.array([-chord[1], chord[0]]) / length
    side = float(np.dot(left, cross_section.centroid - 0.5 * (s + d)))
    if abs(side) <= 1e-9 * max(cross_section.extent):
        return left
    return left if side > 0 else -left


def fit_channel_curve(channel: Channel, layout: OptodeLayout, kappa: float = DEFAULT_KAPPA,
                      n_samples: int = DEFAULT_SAMPLES, mu_a: float = 0.25,
                      mu_s_prime: float = 20.0) -> BananaCurve:
    """Banana-shaped path anchored at the channel's optodes.

    The curve is ``S + t (D - S) + kappa d (1 - (2t - 1)^2) n``, an affine
    image of the Rosenbrock valley with apex depth ``kappa * d``. Samples
    that fall outside the cross-section are projected onto it and flagged.
    """
    if n_samples < 3 or n_samples % 2 == 0:
        raise ValueError(f"n_samples must be odd and >= 3, got {n_samples}")
    if not 0 <= kappa <= 1:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    s = layout.sources[channel.source_index]
    d = layout.detectors[channel.detector_index]
    n = chord_normal(layout.cross_section, s, d)
    sep = float(np.hypot(*(d - s)))
    t = np.linspace(0.0, 1.0, n_samples)
    pts = s + np.outer(t, d - s) + np.outer(kappa * sep * valley_depth(t), n)
    pts[0], pts[-1] = s, d
    cs = layout.cross_section
    clipped = ~cs.contains(pts[:, 0], pts[:, 1], tol=1e-9)
    for k in np.flatnonzero(clipped):
        pts[k] = cs.project(pts[k])
    return BananaCurve(np.array(s), np.array(d), float(kappa), t, pts, clipped,
                       float(path_length(mu_a, mu_s_prime, sep)))
