import numpy as np
import pytest
from sklearn.base import clone

from curvedbeam.banana import fit_channel_curve
from curvedbeam.cosamp import CoSaMPRegressor, build_sensing, cosamp, sensitivity_matrix
from curvedbeam.forward import simulate_measurements
from curvedbeam.phantom import Channel, CrossSection, OptodeLayout, build_layout, numerical_cylindrical
from curvedbeam.pipeline import cosamp_reconstruct
from curvedbeam.reconstruct import CurvedBeamReconstructor


@pytest.mark.parametrize("k", [1, 4, 16])
def test_identity_exact_recovery(k, rng):
    n = 64
    x = np.zeros(n)
    x[rng.choice(n, k, replace=False)] = rng.normal(size=k) + np.sign(rng.normal(size=k))
    est, info = cosamp(np.eye(n), x, k)
    assert np.array_equal(est, x)
    assert info.n_iter == 1


def _lstsq_oracle(A, y, support):
    x = np.zeros(A.shape[1])
    x[support] = np.linalg.lstsq(A[:, support], y, rcond=None)[0]
    return x


def test_gaussian_support_recovery():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(64, 256)) / 8.0
        support = np.sort(rng.choice(256, 5, replace=False))
        x = np.zeros(256)
        x[support] = rng.choice([-1.0, 1.0], 5)
        y = A @ x
        est, _ = cosamp(A, y, 5)
        oracle = _lstsq_oracle(A, y, support)
        same = np.array_equal(np.flatnonzero(est), support)
        if same and np.linalg.norm(est - oracle) <= 1e-6 * np.linalg.norm(oracle):
            hits += 1
    assert hits >= 95


def test_zero_data():
    est, info = cosamp(np.ones((4, 6)), np.zeros(4), 1)
    assert not est.any() and info.n_iter == 0


def test_output_k_sparse_and_residual_nonincreasing(rng):
    A = rng.normal(size=(40, 100))
    y = rng.normal(size=40)
    est, info = cosamp(A, y, 6, max_iter=30)
    assert np.count_nonzero(est) == 6
    kept = info.residual_norms[:-1] if info.stopped_on_increase else info.residual_norms
    assert np.all(np.diff(kept) <= 1e-12)


def test_warns_when_undersampled():
    with pytest.warns(UserWarning, match="3k"):
        cosamp(np.eye(5), np.ones(5), 2)


def test_single_pixel_channel():
    cs = CrossSection("rectangular", (4.0, 4.0))
    lay = OptodeLayout(cs, [(1.3, 0.0)], [(1.4, 0.0)])
    curve = fit_channel_curve(Channel(0, 0, 0.1), lay, kappa=0.1, n_samples=5)
    J = sensitivity_matrix([curve], (4, 4), cs.extent)
    assert np.count_nonzero(J[0]) == 1
    assert J.sum() == pytest.approx(curve.path_length_L)


def test_cylinder_row_count():
    p = numerical_cylindrical()
    ms = simulate_measurements(p, build_layout("cylindrical", (13, 13), p.extent, 1.0), 64, 64)
    est = CurvedBeamReconstructor().fit(ms)
    _, info = cosamp_reconstruct(ms, est, k=8)
    refs = est.reference_channels(ms)
    keep = [c for k, c in enumerate(est.curves_) if k not in set(refs.values())]
    system = build_sensing(keep, np.ones(len(keep)), est.raw_shape_, p.cross_section.extent, 0.25)
    assert system.matrix.shape == (156, 169)
    assert np.allclose(np.linalg.norm(system.matrix[:, ~system.zero_columns], axis=0), 1.0)


def test_regressor_api(rng):
    A = rng.normal(size=(50, 120))
    x = np.zeros(120)
    x[[3, 40, 77]] = [1.0, -2.0, 0.5]
    reg = CoSaMPRegressor(n_nonzero=3).fit(A, A @ x)
    assert reg.get_params() == {"n_nonzero": 3, "max_iter": 50, "tol": 1e-6, "normalize": False}
    assert reg.support_.tolist() == [3, 40, 77]
    assert np.allclose(reg.coef_, x, atol=1e-10)
    assert np.allclose(reg.predict(A), A @ x)
    assert reg.score(A, A @ x) == pytest.approx(1.0)
    scaled = A * rng.uniform(0.1, 10, 120)
    reg2 = clone(reg).set_params(normalize=True).fit(scaled, scaled @ x)
    assert np.allclose(reg2.coef_, x, atol=1e-8)
