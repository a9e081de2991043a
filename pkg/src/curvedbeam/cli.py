"""Command-line interface: ``curvedbeam <command> --config run.yaml ...``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import yaml

from .banana import fit_channel_curve
from .errors import CurvedBeamError
from .forward import simulate_measurements
from .io import (load_config, read_grid_csv, read_measurements, write_curves, write_map,
                 write_measurements, write_pgm, write_volume)
from .metrics import evaluate, format_location, format_metric_table, read_table_csv
from .phantom import enumerate_channels
from .pipeline import compare_methods, cosamp_reconstruct
from .reconstruct import CurvedBeamReconstructor
from .volume import stack_and_interpolate

logger = logging.getLogger("curvedbeam")

COMPARE_COLUMNS = ("method", "location", "mu_a", "mse", "ssim", "psnr", "config_hash")


def _overrides(args) -> dict:
    o: dict = {}
    if getattr(args, "nx", None):
        o.setdefault("solver", {})["nx"] = args.nx
    if getattr(args, "ny", None):
        o.setdefault("solver", {})["ny"] = args.ny
    if getattr(args, "sigma", None) is not None:
        o.setdefault("noise", {})["sigma"] = args.sigma
    if getattr(args, "seed", None) is not None:
        o.setdefault("noise", {})["seed"] = args.seed
    if getattr(args, "kappa", None) is not None:
        o.setdefault("reconstruction", {})["kappa"] = args.kappa
    if getattr(args, "n_samples", None) is not None:
        o.setdefault("reconstruction", {})["n_samples"] = args.n_samples
    if getattr(args, "k", None) is not None:
        o.setdefault("cosamp", {})["k"] = args.k
    if getattr(args, "depths", None):
        o["depths"] = args.depths
    if getattr(args, "output_dir", None):
        o["output_dir"] = str(Path(args.output_dir).resolve())
    return o


def _reconstructor(cfg) -> CurvedBeamReconstructor:
    rc = cfg["reconstruction"]
    return CurvedBeamReconstructor(
        mu_a_background=cfg.phantom.mu_a_background, mu_s_prime=cfg.phantom.mu_s_prime,
        kappa=rc["kappa"], n_samples=rc["n_samples"], correction_mode=rc["correction_mode"],
        clamp_negative=rc["clamp_negative"], upsample_factor=rc["upsample_factor"],
        reference_mode=rc["reference_mode"])


def _outdir(cfg) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _simulate(cfg, depth):
    s, n = cfg["solver"], cfg["noise"]
    return simulate_measurements(cfg.phantom, cfg.layout(depth), s["nx"], s["ny"],
                                 noise_sigma=n["sigma"], seed=n["seed"], a_refl=s["a_refl"],
                                 helmholtz_a=s["helmholtz_a"])


def _tag(z: float) -> str:
    return f"z{z:.3f}"


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    for z in cfg["depths"]:
        path = out / f"measurements_{_tag(z)}.csv"
        write_measurements(_simulate(cfg, z), path)
        print(path)
    return 0


def _read_all(cfg, paths):
    return [read_measurements(p, cfg.phantom.cross_section) for p in paths]


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    for ms in _read_all(cfg, args.measurements):
        m = _reconstructor(cfg).fit_transform(ms)
        stem = out / f"map_{_tag(ms.depth_z)}"
        write_map(m, stem)
        print(stem.with_name(stem.name + ".csv"))
    return 0


def cmd_reconstruct3d(args) -> int:
    if len(args.measurements) < 2:
        raise ValueError("reconstruct3d needs at least two measurement files")
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    maps = [_reconstructor(cfg).fit_transform(ms) for ms in _read_all(cfg, args.measurements)]
    vol = stack_and_interpolate(maps, cfg["volume"]["n_z_out"])
    write_volume(vol, out / "volume.raw")
    planes = out / "planes"
    planes.mkdir(exist_ok=True)
    for z, g in zip(vol.planes_z, vol.grid):
        write_pgm(g, planes / f"plane_{_tag(z)}.pgm")
    print(out / "volume.raw")
    return 0


def cmd_cosamp(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    cs = cfg["cosamp"]
    for ms in _read_all(cfg, args.measurements):
        m, info = cosamp_reconstruct(ms, _reconstructor(cfg), cs["k"], cs["max_iter"], cs["tol"])
        stem = out / f"cosamp_{_tag(ms.depth_z)}"
        write_map(m, stem)
        logger.info("CoSaMP stopped after %d iterations", info.n_iter)
        print(stem.with_name(stem.name + ".csv"))
    return 0


def _metric_row(method, rep, n_true):
    centers = rep.inclusion_centers_found[:n_true]
    return {"method": method,
            "location": format_location(centers),
            "mu_a": rep.peak_mu_a, "mse": rep.mse, "ssim": rep.ssim, "psnr": rep.psnr_db}


def _write_rows(rows, path, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    Path(path).write_text(buf.getvalue())


def cmd_metrics(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    grid, meta = read_grid_csv(args.map)
    rep = evaluate(grid, cfg.phantom, meta["depth_z"], meta["extent"])
    stem = out / (Path(args.map).stem + "_metrics")
    stem.with_name(stem.name + ".yaml").write_text(yaml.safe_dump(rep.as_dict(), sort_keys=True))
    n_true = len(cfg.phantom.active_inclusions(meta["depth_z"]))
    row = _metric_row(Path(args.map).stem, rep, n_true)
    row["config_hash"] = cfg.config_hash()
    _write_rows([row], stem.with_name(stem.name + ".csv"), COMPARE_COLUMNS)
    print(format_metric_table([row]), end="")
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    if args.measurements:
        ms = read_measurements(args.measurements, cfg.phantom.cross_section)
    else:
        ms = _simulate(cfg, cfg["depths"][0])
    cs = cfg["cosamp"]
    rows = compare_methods(cfg.phantom, ms, _reconstructor(cfg), cs["k"], cs["max_iter"], cs["tol"])
    h = cfg.config_hash()
    for r in rows:
        r["config_hash"] = h
    _write_rows(rows, out / "compare.csv", COMPARE_COLUMNS)
    print(format_metric_table(rows, COMPARE_COLUMNS[:-1]), end="")
    return 0


def cmd_paths(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = _outdir(cfg)
    layout = cfg.layout(cfg["depths"][0])
    rc = cfg["reconstruction"]
    channels = enumerate_channels(layout)
    curves = [fit_channel_curve(ch, layout, rc["kappa"], rc["n_samples"],
                                cfg.phantom.mu_a_background, cfg.phantom.mu_s_prime)
              for ch in channels]
    write_curves(channels, curves, out / "curves.csv")
    print(out / "curves.csv")
    return 0


def cmd_table(args) -> int:
    rows = read_table_csv(Path(args.csv).read_text())
    columns = list(rows[0]) if rows else []
    print(format_metric_table(rows, columns), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvedbeam",
                                description="Curved-beam diffuse optical tomography toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, measurements=None):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--output-dir", help="override output_dir")
        if measurements == "many":
            sp.add_argument("--measurements", nargs="+", required=True, help="measurement CSV files")
        elif measurements == "optional":
            sp.add_argument("--measurements", help="measurement CSV (simulated if omitted)")
        return sp

    sp = add("simulate", cmd_simulate, "synthesize measurement CSVs, one per depth")
    sp.add_argument("--nx", type=int)
    sp.add_argument("--ny", type=int)
    sp.add_argument("--sigma", type=float, help="log-normal noise sigma")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--depths", type=float, nargs="+")
    for name, func, help_ in (("reconstruct", cmd_reconstruct, "curved-beam 2-D maps"),
                              ("reconstruct3d", cmd_reconstruct3d, "stack 2-D maps into a volume"),
                              ("cosamp", cmd_cosamp, "CoSaMP baseline maps")):
        sp = add(name, func, help_, "many")
        sp.add_argument("--kappa", type=float)
        sp.add_argument("--n-samples", type=int)
        if name == "cosamp":
            sp.add_argument("--k", type=int, help="sparsity level")
    sp = add("metrics", cmd_metrics, "score a map CSV against the configured phantom")
    sp.add_argument("--map", required=True)
    sp = add("compare", cmd_compare, "curved-beam vs CoSaMP metric table", "optional")
    sp.add_argument("--k", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--seed", type=int)
    sp = add("paths", cmd_paths, "dump banana curves as CSV")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--n-samples", type=int)
    tp = sub.add_parser("table", help="render a metric table CSV")
    tp.add_argument("--csv", required=True)
    tp.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CurvedBeamError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
