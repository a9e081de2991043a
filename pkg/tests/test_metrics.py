import math

import numpy as np
import pytest

from curvedbeam.metrics import (format_metric_table, localize, match_centers, mse, psnr,
                                rasterize_truth, read_table_csv, ssim_global)
from curvedbeam.phantom import numerical_rectangular


def test_mse_cases(rng):
    x = rng.uniform(size=(6, 7))
    assert mse(x, x) == 0.0
    assert mse(x + 0.1, x) == pytest.approx(0.01)


def test_psnr_cases():
    truth = np.ones((4, 4))
    assert psnr(truth - 0.1, truth, peakval=1.0) == pytest.approx(20.0, abs=1e-12)
    assert psnr(truth - 0.1, truth, peakval=2.0) == pytest.approx(26.0206, abs=1e-4)
    assert psnr(truth, truth) == math.inf


def test_ssim_identity_and_constants(rng):
    x = rng.uniform(size=(9, 9))
    assert ssim_global(x, x, 1.0) == 1.0
    assert ssim_global(np.full((3, 3), 0.4), np.full((3, 3), 0.4), 1.0) == 1.0


def test_ssim_two_by_two_oracle():
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    y = np.array([[0.0, 0.5], [0.5, 0.0]])
    # means 0.5 / 0.25, variances 0.25 / 0.0625, covariance 0.125, C1 = 1e-4, C2 = 9e-4
    oracle = (0.2501 * 0.2509) / (0.3126 * 0.3134)
    assert oracle == pytest.approx(0.640511, abs=1e-6)
    assert ssim_global(x, y, 1.0) == pytest.approx(oracle, rel=1e-12)


def test_ssim_symmetric(rng):
    x, y = rng.uniform(size=(2, 8, 8))
    assert ssim_global(x, y, 1.0) == pytest.approx(ssim_global(y, x, 1.0), rel=1e-14)


def _blob(cx, cy, shape=(121, 121), extent=(3.0, 3.0), sigma=0.2):
    xs = np.linspace(0, extent[0], shape[1])
    ys = np.linspace(0, extent[1], shape[0])
    X, Y = np.meshgrid(xs, ys)
    return 0.25 + 5 * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * sigma ** 2))


def test_localize_gaussian_blob():
    found = localize(_blob(1.6, 1.5), (3.0, 3.0))
    assert len(found) == 1
    assert math.hypot(found[0][0] - 1.6, found[0][1] - 1.5) < 0.05


def test_localize_homogeneous_empty():
    assert localize(np.full((10, 10), 0.25), (3.0, 3.0)) == []


def test_localize_translation_consistent():
    a = localize(_blob(1.2, 1.0), (3.0, 3.0))[0]
    b = localize(_blob(1.7, 1.5), (3.0, 3.0))[0]
    assert b[0] - a[0] == pytest.approx(0.5, abs=0.03)
    assert b[1] - a[1] == pytest.approx(0.5, abs=0.03)


def test_localize_two_blobs_sorted_by_peak():
    g = _blob(0.8, 0.8) + 0.7 * (_blob(2.2, 2.2) - 0.25)
    found = localize(g, (3.0, 3.0))
    assert len(found) == 2 and found[0][2] > found[1][2]
    assert math.hypot(found[0][0] - 0.8, found[0][1] - 0.8) < 0.05


def test_match_centers():
    found = [(1.0, 1.0, 5.0), (2.0, 2.0, 3.0), (0.0, 0.0, 1.0)]
    assert match_centers(found, [(2.0, 2.1), (1.1, 1.0)]) == pytest.approx([0.1, 0.1])
    assert match_centers([], [(1.0, 1.0)]) == [math.inf]


def test_rasterize_truth():
    truth, mask = rasterize_truth(numerical_rectangular(), (31, 31), 1.0)
    assert mask.all()
    assert truth[15, 15] == 6.76 and truth[0, 0] == 0.25


def test_table_formatting():
    rows = [{"method": "a", "location": "(1.00, 2.00)", "mu_a": 1.23456, "mse": None,
             "ssim": 0.5, "psnr": math.inf}]
    text = format_metric_table(rows)
    lines = text.splitlines()
    assert lines[0].split() == ["method", "location", "mu_a", "mse", "ssim", "psnr"]
    assert lines[2].split() == ["a", "(1.00,", "2.00)", "1.235", "-", "0.500", "inf"]
    assert read_table_csv("a,b\n1.50,x\n") == [{"a": "1.50", "b": "x"}]
