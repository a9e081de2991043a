"""Configuration parsing and file formats.

Formats
-------
measurement CSV
    ``source_index,detector_index,source_x_cm,source_y_cm,detector_x_cm,
    detector_y_cm,depth_z_cm,intensity``; one row per channel.
map CSV
    ``#``-prefixed header lines (``depth_z_cm``, ``extent_cm``, ``shape``)
    followed by row-major comma-separated values; row 0 is y = 0.
PGM
    Binary 16-bit (P5, maxval 65535, big-endian) with a YAML sidecar holding
    the linear ``min``/``max`` scaling.
volume
    Raw float32 little-endian, z-major, plus a YAML sidecar (``dims``,
    ``extent_cm``, ``depths_in_cm``, ``planes_z_cm``).

Floats are written with ``repr`` so that reading and re-writing a file
reproduces it byte for byte.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .forward import MeasurementSet
from .mbll import AbsorptionMap2D
from .phantom import CrossSection, Inclusion, OptodeLayout, Phantom, build_layout
from .volume import Volume3D

MEASUREMENT_COLUMNS = ("source_index", "detector_index", "source_x_cm", "source_y_cm",
                       "detector_x_cm", "detector_y_cm", "depth_z_cm", "intensity")

DEFAULTS = {
    "layout": {"n_sources": 12, "n_detectors": 16},
    "solver": {"nx": 128, "ny": 128, "a_refl": 2.74, "helmholtz_a": None},
    "reconstruction": {"kappa": 0.35, "n_samples": 15, "correction_mode": "differential",
                       "clamp_negative": True, "upsample_factor": 32,
                       "reference_mode": "per_source"},
    "depths": [1.0],
    "noise": {"sigma": 0.0, "seed": 0},
    "cosamp": {"k": 8, "max_iter": 50, "tol": 1e-6},
    "volume": {"n_z_out": 33},
    "output_dir": "out",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def phantom_from_dict(d: dict) -> Phantom:
    try:
        incs = tuple(Inclusion(tuple(i["center"]), float(i["radius"]), float(i["mu_a"]),
                               i.get("depth_top")) for i in d.get("inclusions") or [])
        return Phantom(d["shape"], tuple(d["extent"]), float(d["mu_a_background"]),
                       float(d["mu_s_prime"]), incs)
    except KeyError as exc:
        raise ConfigError(f"phantom is missing key {exc}") from None


def phantom_to_dict(p: Phantom) -> dict:
    return {"shape": p.shape, "extent": list(p.extent), "mu_a_background": p.mu_a_background,
            "mu_s_prime": p.mu_s_prime,
            "inclusions": [{"center": list(i.center), "radius": i.radius, "mu_a": i.mu_a,
                            "depth_top": i.depth_top} for i in p.inclusions]}


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    phantom: Phantom
    settings: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source_path: Path | None = None

    def __getitem__(self, key):
        return self.settings[key]

    def layout(self, depth_z: float) -> OptodeLayout:
        lay = self.settings["layout"]
        if "sources" in lay:
            return OptodeLayout(self.phantom.cross_section, lay["sources"], lay["detectors"], depth_z)
        return build_layout(self.phantom.shape, (lay["n_sources"], lay["n_detectors"]),
                            self.phantom.extent, depth_z)

    def to_dict(self) -> dict:
        d = copy.deepcopy(self.settings)
        d["phantom"] = phantom_to_dict(self.phantom)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def output_dir(self) -> Path:
        out = Path(self.settings["output_dir"])
        if not out.is_absolute() and self.source_path is not None:
            out = self.source_path.parent / out
        return out


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a YAML run configuration.

    ``phantom`` may be an inline mapping or a path (relative to the config
    file) to a YAML file holding one.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    raw = yaml.safe_load(path.read_text()) or {}
    settings = _merge(DEFAULTS, {k: v for k, v in raw.items() if k != "phantom"})
    if overrides:
        settings = _merge(settings, overrides)
    ph = raw.get("phantom")
    if ph is None:
        raise ConfigError(f"{path}: no phantom section")
    if isinstance(ph, str):
        ph_path = Path(ph)
        if not ph_path.is_absolute():
            ph_path = path.parent / ph_path
        if not ph_path.is_file():
            raise FileNotFoundError(f"phantom file not found: {ph_path}")
        ph = yaml.safe_load(ph_path.read_text())
    _validate(settings)
    return RunConfig(phantom_from_dict(ph), settings, path)


def _validate(s: dict):
    rc = s["reconstruction"]
    if not 0 <= rc["kappa"] <= 1:
        raise ConfigError("reconstruction.kappa must lie in [0, 1]")
    if rc["n_samples"] < 3 or rc["n_samples"] % 2 == 0:
        raise ConfigError("reconstruction.n_samples must be odd and >= 3")
    if s["noise"]["sigma"] < 0:
        raise ConfigError("noise.sigma must be >= 0")
    if s["cosamp"]["k"] < 1:
        raise ConfigError("cosamp.k must be >= 1")
    if not s["depths"]:
        raise ConfigError("depths must not be empty")


# measurement sets -----------------------------------------------------------

def write_measurements(ms: MeasurementSet, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEASUREMENT_COLUMNS)
    lay = ms.layout
    for s, d, v in zip(ms.source_index, ms.detector_index, ms.intensity):
        sp, dp = lay.sources[s], lay.detectors[d]
        w.writerow([int(s), int(d), repr(float(sp[0])), repr(float(sp[1])), repr(float(dp[0])),
                    repr(float(dp[1])), repr(float(lay.depth_z)), repr(float(v))])
    Path(path).write_text(buf.getvalue())


def read_measurements(path, cross_section: CrossSection) -> MeasurementSet:
    """Read a measurement CSV; optode positions are rebuilt from its rows."""
    rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
    if not rows:
        raise ValueError(f"{path}: no measurement rows")
    missing = set(MEASUREMENT_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    sources, detectors = {}, {}
    for r in rows:
        sources[int(r["source_index"])] = (float(r["source_x_cm"]), float(r["source_y_cm"]))
        detectors[int(r["detector_index"])] = (float(r["detector_x_cm"]), float(r["detector_y_cm"]))
    depths = {float(r["depth_z_cm"]) for r in rows}
    if len(depths) != 1:
        raise ValueError(f"{path}: rows span several depths {sorted(depths)}")
    for name, idx in (("source", sources), ("detector", detectors)):
        if sorted(idx) != list(range(len(idx))):
            raise ValueError(f"{path}: {name} indices are not contiguous from 0")
    layout = OptodeLayout(cross_section, [sources[i] for i in range(len(sources))],
                          [detectors[i] for i in range(len(detectors))], depths.pop())
    return MeasurementSet(layout, [int(r["source_index"]) for r in rows],
                          [int(r["detector_index"]) for r in rows],
                          [float(r["intensity"]) for r in rows], provenance="file")


# maps -----------------------------------------------------------------------

def write_grid_csv(grid, path, depth_z: float, extent):
    g = np.asarray(grid, dtype=float)
    lines = [f"# depth_z_cm={float(depth_z)!r}",
             f"# extent_cm={float(extent[0])!r},{float(extent[1])!r}",
             f"# shape={g.shape[0]},{g.shape[1]}"]
    lines += [",".join(repr(float(v)) for v in row) for row in g]
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_csv(path):
    """Return ``(grid, meta)`` with ``meta`` keys ``depth_z``, ``extent``."""
    meta, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        elif line.strip():
            rows.append([float(v) for v in line.split(",")])
    grid = np.array(rows)
    shape = tuple(int(v) for v in meta["shape"].split(","))
    if grid.shape != shape:
        raise ValueError(f"{path}: header shape {shape} does not match data {grid.shape}")
    return grid, {"depth_z": float(meta["depth_z_cm"]),
                  "extent": tuple(float(v) for v in meta["extent_cm"].split(","))}


def write_map(m: AbsorptionMap2D, stem):
    """Write ``<stem>.csv``, ``<stem>_raw.csv``, ``<stem>.pgm`` and its sidecar."""
    stem = Path(stem)
    write_grid_csv(m.upsampled_grid, stem.with_name(stem.name + ".csv"), m.depth_z, m.extent)
    write_grid_csv(m.raw_grid, stem.with_name(stem.name + "_raw.csv"), m.depth_z, m.extent)
    write_pgm(m.upsampled_grid, stem.with_name(stem.name + ".pgm"))


def write_pgm(grid, path):
    """16-bit PGM, top row = largest y, with ``<path>.yaml`` scaling sidecar."""
    g = np.asarray(grid, dtype=float)
    lo, hi = float(g.min()), float(g.max())
    span = hi - lo
    scaled = np.zeros(g.shape) if span == 0 else (g - lo) / span * 65535.0
    data = np.rint(scaled).astype(">u2")[::-1]
    header = f"P5\n{g.shape[1]} {g.shape[0]}\n65535\n".encode()
    Path(path).write_bytes(header + data.tobytes())
    Path(str(path) + ".yaml").write_text(yaml.safe_dump(
        {"min": lo, "max": hi, "rows": g.shape[0], "cols": g.shape[1], "row0": "max_y"},
        sort_keys=True))


def read_pgm(path):
    """Inverse of :func:`write_pgm` (values quantised to 16 bits)."""
    blob = Path(path).read_bytes()
    parts = blob.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows = (int(v) for v in parts[1].split())
    data = np.frombuffer(parts[3], dtype=">u2").reshape(rows, cols)[::-1].astype(float)
    side = yaml.safe_load(Path(str(path) + ".yaml").read_text())
    out = side["min"] + data / 65535.0 * (side["max"] - side["min"])
    out[data == 65535] = side["max"]  # keep the scaling exact on a re-write
    return out


# volumes --------------------------------------------------------------------

def write_volume(v: Volume3D, path):
    path = Path(path)
    np.asarray(v.grid, dtype="<f4").tofile(path)
    side = {"dims": list(v.grid.shape), "order": "z-major", "dtype": "float32-le",
            "extent_cm": [float(e) for e in v.extent],
            "depths_in_cm": [float(z) for z in v.depths_in],
            "planes_z_cm": [float(z) for z in v.planes_z]}
    path.with_suffix(".yaml").write_text(yaml.safe_dump(side, sort_keys=True))


def read_volume(path):
    """Return ``(grid, sidecar)``."""
    path = Path(path)
    side = yaml.safe_load(path.with_suffix(".yaml").read_text())
    grid = np.fromfile(path, dtype="<f4").reshape(side["dims"])
    return grid, side


# curves ---------------------------------------------------------------------

def write_curves(channels, curves, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("channel_id", "source_index", "detector_index", "t", "x_cm", "y_cm", "clipped"))
    for k, (ch, c) in enumerate(zip(channels, curves)):
        for t, (x, y), clip in zip(c.t, c.samples, c.clipped):
            w.writerow((k, ch.source_index, ch.detector_index, repr(float(t)), repr(float(x)),
                        repr(float(y)), int(clip)))
    Path(path).write_text(buf.getvalue())


def read_curves(path) -> dict[int, dict]:
    """Curves keyed by channel id: ``source_index``, ``detector_index``, ``t``,
    ``samples`` (n x 2) and boolean ``clipped``."""
    out: dict[int, dict] = {}
    for r in csv.DictReader(io.StringIO(Path(path).read_text())):
        c = out.setdefault(int(r["channel_id"]), {
            "source_index": int(r["source_index"]), "detector_index": int(r["detector_index"]),
            "t": [], "samples": [], "clipped": []})
        c["t"].append(float(r["t"]))
        c["samples"].append((float(r["x_cm"]), float(r["y_cm"])))
        c["clipped"].append(bool(int(r["clipped"])))
    for c in out.values():
        c["t"] = np.array(c["t"])
        c["samples"] = np.array(c["samples"])
        c["clipped"] = np.array(c["clipped"])
    return out


def write_curve_records(records: dict[int, dict], path):
    """Write records as returned by :func:`read_curves`."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("channel_id", "source_index", "detector_index", "t", "x_cm", "y_cm", "clipped"))
    for k in sorted(records):
        c = records[k]
        for t, (x, y), clip in zip(c["t"], c["samples"], c["clipped"]):
            w.writerow((k, c["source_index"], c["detector_index"], repr(float(t)), repr(float(x)),
                        repr(float(y)), int(clip)))
    Path(path).write_text(buf.getvalue())
