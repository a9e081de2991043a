import csv
import io
from pathlib import Path

import numpy as np
import pytest

from curvedbeam.cli import main
from curvedbeam.metrics import format_metric_table, read_table_csv

FIXTURES = Path(__file__).parent / "fixtures"

PHANTOM = """
phantom:
  shape: rectangular
  extent: [3.0, 3.0, 2.2]
  mu_a_background: 0.25
  mu_s_prime: 20.0
  inclusions: {incs}
layout: {{n_sources: 12, n_detectors: 16}}
solver: {{nx: 64, ny: 64}}
depths: [0.5, 1.1, 1.8]
output_dir: out
"""
SINGLE = "[{center: [1.5, 1.5], radius: 0.25, mu_a: 6.76}]"


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(PHANTOM.format(incs=SINGLE))
    return p


def _run(*argv):
    return main([str(a) for a in argv])


def test_simulate_writes_one_file_per_depth(config, tmp_path):
    assert _run("simulate", "--config", config) == 0
    files = sorted((tmp_path / "out").glob("measurements_*.csv"))
    assert [f.name for f in files] == ["measurements_z0.500.csv", "measurements_z1.100.csv",
                                       "measurements_z1.800.csv"]


def test_missing_phantom_file(tmp_path, capsys):
    p = tmp_path / "run.yaml"
    p.write_text("phantom: nowhere/phantom.yaml\n")
    assert _run("simulate", "--config", p) != 0
    assert "nowhere/phantom.yaml" in capsys.readouterr().err


def test_reruns_are_byte_identical(config, tmp_path):
    for out in ("r1", "r2"):
        assert _run("simulate", "--config", config, "--output-dir", tmp_path / out) == 0
        ms = sorted((tmp_path / out).glob("measurements_*.csv"))
        assert _run("reconstruct", "--config", config, "--output-dir", tmp_path / out,
                    "--measurements", *ms) == 0
    for f in sorted((tmp_path / "r1").iterdir()):
        assert f.read_bytes() == (tmp_path / "r2" / f.name).read_bytes(), f.name


def test_reconstruct_map_dimensions(config, tmp_path):
    _run("simulate", "--config", config, "--depths", "1.0")
    ms = tmp_path / "out" / "measurements_z1.000.csv"
    assert _run("reconstruct", "--config", config, "--measurements", ms) == 0
    lines = (tmp_path / "out" / "map_z1.000.csv").read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert len(data) == 353 and len(data[0].split(",")) == 481
    assert "# shape=353,481" in lines


def test_reconstruct3d(config, tmp_path, capsys):
    _run("simulate", "--config", config)
    ms = sorted((tmp_path / "out").glob("measurements_*.csv"))
    assert _run("reconstruct3d", "--config", config, "--measurements", ms[0]) != 0
    assert "at least two" in capsys.readouterr().err
    assert _run("reconstruct3d", "--config", config, "--measurements", *ms) == 0
    raw = tmp_path / "out" / "volume.raw"
    assert raw.stat().st_size == 33 * 353 * 481 * 4
    assert len(list((tmp_path / "out" / "planes").glob("*.pgm"))) == 33


def _compare_rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_compare_homogeneous_has_empty_locations(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(PHANTOM.format(incs="[]"))
    assert _run("compare", "--config", p) == 0
    rows = _compare_rows(tmp_path / "out" / "compare.csv")
    assert [r["method"] for r in rows] == ["curved-beam", "cosamp"]
    assert all(r["location"] == "" for r in rows)


def test_compare_single_inclusion(config, tmp_path, capsys):
    assert _run("compare", "--config", config, "--k", "4") == 0
    rows = _compare_rows(tmp_path / "out" / "compare.csv")
    assert len(rows) == 2
    assert list(rows[0]) == ["method", "location", "mu_a", "mse", "ssim", "psnr", "config_hash"]
    assert len({r["config_hash"] for r in rows}) == 1 and len(rows[0]["config_hash"]) == 16
    out = capsys.readouterr().out
    assert "curved-beam" in out and "cosamp" in out


def test_cosamp_metrics_and_paths(config, tmp_path):
    _run("simulate", "--config", config, "--depths", "1.0")
    ms = tmp_path / "out" / "measurements_z1.000.csv"
    assert _run("cosamp", "--config", config, "--measurements", ms) == 0
    assert _run("metrics", "--config", config, "--map", tmp_path / "out" / "cosamp_z1.000.csv") == 0
    assert (tmp_path / "out" / "cosamp_z1.000_metrics.yaml").exists()
    assert _run("paths", "--config", config) == 0
    n_rows = len((tmp_path / "out" / "curves.csv").read_text().splitlines()) - 1
    assert n_rows == 192 * 15


def test_reference_table_rendering(capsys):
    path = FIXTURES / "reference_tables.csv"
    rows = read_table_csv(path.read_text())
    columns = list(rows[0])
    assert _run("table", "--csv", path) == 0
    text = capsys.readouterr().out
    assert text == format_metric_table(rows, columns)
    lines = text.splitlines()
    starts = [0]
    header = lines[0]
    for c in columns[1:]:
        starts.append(header.index("  " + c) + 2)
    assert [lines[0][s:].split("  ")[0].strip() for s in starts] == columns
    for line, row in zip(lines[2:], rows):
        cells = [line[a:b].strip() for a, b in zip(starts, starts[1:] + [None])]
        assert cells == [row[c] or "-" for c in columns]
    assert "(1.15, 3.85) & (4.40, 2.75)" in text and "33.203" in text and "0.520" in text
