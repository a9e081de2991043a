"""Image-quality and localisation metrics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionError
from .mbll import grid_nodes
from .phantom import Phantom, mu_a_grid


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    return x, y


def mse(recon, truth) -> float:
    r, t = _pair(recon, truth)
    return float(np.mean((r - t) ** 2))


def psnr(recon, truth, peakval=None) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical images."""
    r, t = _pair(recon, truth)
    err = mse(r, t)
    if peakval is None:
        peakval = float(t.max())
    if err == 0:
        return math.inf
    return float(10.0 * np.log10(peakval ** 2 / err))


def ssim_global(x, y, dynamic_range: float, k1: float = 0.01, k2: float = 0.03) -> float:
    """Single-window SSIM computed from whole-image statistics (ddof=0)."""
    x, y = _pair(x, y)
    if dynamic_range <= 0:
        raise ValueError("dynamic_range must be positive")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    mx, my = x.mean(), y.mean()
    vx = np.mean((x - mx) ** 2)
    vy = np.mean((y - my) ** 2)
    cov = np.mean((x - mx) * (y - my))
    return float((2 * mx * my + c1) * (2 * cov + c2) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))


def localize(grid, extent, threshold_fraction: float = 0.5, background=None, mask=None):
    """Centres of bright blobs as intensity-weighted centroids in cm.

    The threshold is ``background + fraction * (max - background)``, with
    the background defaulting to the median. Components use
    8-connectivity. Returns a list of ``(x, y, peak)`` sorted by peak,
    brightest first.
    """
    g = np.asarray(grid, dtype=float)
    valid = np.ones(g.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    vals = g[valid]
    bg = float(np.median(vals)) if background is None else float(background)
    top = float(vals.max())
    if top <= bg or np.ptp(vals) == 0:
        return []
    thr = bg + threshold_fraction * (top - bg)
    labels, n = ndimage.label((g > thr) & valid, structure=np.ones((3, 3)))
    xs, ys = grid_nodes(g.shape, extent)
    X, Y = np.meshgrid(xs, ys)
    found = []
    for lab in range(1, n + 1):
        sel = labels == lab
        w = g[sel] - thr
        found.append((float(np.sum(w * X[sel]) / np.sum(w)),
                      float(np.sum(w * Y[sel]) / np.sum(w)),
                      float(g[sel].max())))
    found.sort(key=lambda c: -c[2])
    return found


def rasterize_truth(phantom: Phantom, shape, depth_z: float):
    """Ground-truth absorption at the nodes of a grid spanning the cross-section.

    Returns ``(grid, mask)``; nodes outside a disk are set to the background.
    """
    cs = phantom.cross_section
    xs, ys = grid_nodes(shape, cs.extent)
    X, Y = np.meshgrid(xs, ys)
    mask = cs.contains(X, Y, tol=1e-9)
    truth = mu_a_grid(phantom, X, Y, depth_z)
    truth[~mask] = phantom.mu_a_background
    return truth, mask


@dataclass
class MetricReport:
    mse: float
    psnr_db: float
    ssim: float
    inclusion_centers_found: list = field(default_factory=list)
    center_errors: list = field(default_factory=list)
    peak_mu_a: float = float("nan")

    def as_dict(self) -> dict:
        return {"mse": self.mse, "psnr_db": self.psnr_db, "ssim": self.ssim,
                "inclusion_centers_found": [list(c) for c in self.inclusion_centers_found],
                "center_errors": list(self.center_errors), "peak_mu_a": self.peak_mu_a}


def match_centers(found, truth_centers):
    """Localisation error of each true centre.

    Only the ``len(truth_centers)`` brightest components count, mirroring
    one reported location per inclusion; matching is greedy without reuse.
    """
    remaining = sorted(found, key=lambda c: -c[2])[:len(truth_centers)]
    errors = []
    for tc in truth_centers:
        if not remaining:
            errors.append(math.inf)
            continue
        d = [math.hypot(f[0] - tc[0], f[1] - tc[1]) for f in remaining]
        k = int(np.argmin(d))
        errors.append(d[k])
        remaining.pop(k)
    return errors


def evaluate(recon, phantom: Phantom, depth_z: float, extent=None, threshold_fraction=0.5):
    """Compare a reconstructed grid with the rasterised phantom at ``depth_z``."""
    recon = np.asarray(recon, dtype=float)
    truth, mask = rasterize_truth(phantom, recon.shape, depth_z)
    r, t = recon[mask], truth[mask]
    dyn = float(t.max() - t.min()) or float(t.max())
    found = localize(recon, extent or phantom.cross_section.extent, threshold_fraction, mask=mask)
    centers = [inc.center for inc in phantom.active_inclusions(depth_z)]
    return MetricReport(
        mse=mse(r, t), psnr_db=psnr(r, t), ssim=ssim_global(r, t, dyn),
        inclusion_centers_found=[(x, y) for x, y, _ in found],
        center_errors=match_centers(found, centers),
        peak_mu_a=float(r.max()))


TABLE_COLUMNS = ("method", "location", "mu_a", "mse", "ssim", "psnr")


def format_location(centers) -> str:
    return " & ".join(f"({x:.2f}, {y:.2f})" for x, y in centers)


def format_metric_table(rows, columns=TABLE_COLUMNS) -> str:
    """Render rows (dicts) as a fixed-width text table; missing cells print as '-'."""
    cells = [[str(c) for c in columns]]
    for row in rows:
        cells.append([_fmt(row.get(c, "")) for c in columns])
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None or v == "":
        return "-"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.3f}"
    return str(v)


def read_table_csv(text: str) -> list[dict]:
    """Parse a metric table CSV; cells stay as the exact text written."""
    return [dict(row) for row in csv.DictReader(io.StringIO(text))]
