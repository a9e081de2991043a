"""CoSaMP sparse-recovery baseline on a curved-channel sensitivity matrix."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .banana import BananaCurve
from .mbll import points_to_cells

logger = logging.getLogger(__name__)

DEFAULT_K = 8


@dataclass
class CoSaMPInfo:
    n_iter: int = 0
    residual_norms: list = field(default_factory=list)
    rank_deficient: bool = False
    stopped_on_increase: bool = False


def _top(v, k):
    """Indices of the ``k`` largest-magnitude entries, ties broken by index."""
    k = min(k, v.size)
    order = np.lexsort((np.arange(v.size), -np.abs(v)))
    return np.sort(order[:k])


def cosamp(A, y, k, max_iter=50, tol=1e-6):
    """Compressive sampling matching pursuit.

    Each iteration merges the ``2k`` largest proxy entries with the current
    support, solves least squares there and prunes to ``k`` entries. Stops
    when ``||r|| <= tol * ||y||``, after ``max_iter`` iterations, or when the
    residual grows (the best iterate is returned).

    Returns ``(x, info)`` with ``x`` exactly ``k``-sparse unless ``y`` is
    zero or the data admit fewer nonzeros.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    if k < 1:
        raise ValueError("sparsity k must be >= 1")
    if 3 * k > m:
        warnings.warn(f"3k = {3 * k} exceeds the number of measurements m = {m}", stacklevel=2)
    info = CoSaMPInfo()
    x = np.zeros(n)
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return x, info
    r = y.copy()
    best_x, best_res = x, y_norm
    support = np.array([], dtype=int)
    for it in range(1, max_iter + 1):
        proxy = A.T @ r
        merged = np.union1d(_top(proxy, 2 * k), support)
        b = np.zeros(n)
        sol, _, rank, _ = np.linalg.lstsq(A[:, merged], y, rcond=None)
        if rank < merged.size:
            info.rank_deficient = True
        b[merged] = sol
        support = _top(b, k)
        x = np.zeros(n)
        x[support] = b[support]
        r = y - A @ x
        res = float(np.linalg.norm(r))
        info.n_iter = it
        info.residual_norms.append(res)
        if res > best_res:
            info.stopped_on_increase = True
            break
        best_x, best_res = x, res
        if res <= tol * y_norm:
            break
    return best_x, info


@dataclass(eq=False)
class SensingSystem:
    """Curved-channel sensitivity matrix with column normalisation.

    ``matrix`` holds normalised columns; ``column_norms`` undo it. ``y`` is
    the differential attenuation per channel and ``y_background`` what a
    homogeneous background ``mu_o`` would produce.
    """

    matrix: np.ndarray
    column_norms: np.ndarray
    y: np.ndarray
    y_background: np.ndarray
    coarse_shape: tuple[int, int]
    sparsity_k: int = DEFAULT_K

    @property
    def zero_columns(self) -> np.ndarray:
        return self.column_norms == 0

    @property
    def data(self) -> np.ndarray:
        """Perturbation data ``y - y_background`` fitted by the solver."""
        return self.y - self.y_background


def sensitivity_matrix(curves: list[BananaCurve], coarse_shape, extent) -> np.ndarray:
    """``J[ch, px]`` = samples of curve ``ch`` in pixel ``px`` times ``L / n_samples``."""
    n_px = int(np.prod(coarse_shape))
    J = np.zeros((len(curves), n_px))
    for row, c in enumerate(curves):
        rr, cc = points_to_cells(c.samples, coarse_shape, extent)
        flat = np.ravel_multi_index((rr, cc), coarse_shape)
        np.add.at(J[row], flat, c.path_length_L / len(c.samples))
    return J


def build_sensing(curves, attenuations, coarse_shape, extent, mu_o: float,
                  sparsity_k: int = DEFAULT_K) -> SensingSystem:
    """Assemble a :class:`SensingSystem` for the non-reference channels.

    ``curves`` and ``attenuations`` (``ln(I_ref / I_j)``) are aligned.
    """
    J = sensitivity_matrix(curves, coarse_shape, extent)
    norms = np.linalg.norm(J, axis=0)
    if np.any(norms == 0):
        logger.info("%d pixels are never traversed", int(np.sum(norms == 0)))
    Jn = np.divide(J, norms, out=np.zeros_like(J), where=norms > 0)
    y = np.asarray(attenuations, dtype=float)
    y_bg = J.sum(axis=1) * mu_o
    return SensingSystem(Jn, norms, y, y_bg, tuple(coarse_shape), int(sparsity_k))


def cosamp_solve(system: SensingSystem, max_iter: int = 50, tol: float = 1e-6):
    """Recover the sparse absorption perturbation on the coarse grid.

    Returns ``(grid, info)`` where ``grid`` is in cm^-1 (perturbation only).
    """
    z, info = cosamp(system.matrix, system.data, system.sparsity_k, max_iter, tol)
    x = np.divide(z, system.column_norms, out=np.zeros_like(z), where=system.column_norms > 0)
    return x.reshape(system.coarse_shape), info


class CoSaMPRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn wrapper: ``fit(A, y)`` finds a ``n_nonzero``-sparse ``coef_``.

    Parameters
    ----------
    n_nonzero : int
        Target sparsity k.
    max_iter : int
    tol : float
        Relative residual at which iteration stops.
    normalize : bool
        Normalise columns of ``A`` before solving; ``coef_`` is reported in
        the original column scale.
    """

    def __init__(self, n_nonzero=DEFAULT_K, max_iter=50, tol=1e-6, normalize=False):
        self.n_nonzero = n_nonzero
        self.max_iter = max_iter
        self.tol = tol
        self.normalize = normalize

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.normalize:
            norms = np.linalg.norm(X, axis=0)
            Xn = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
        else:
            norms, Xn = np.ones(X.shape[1]), X
        z, info = cosamp(Xn, y, self.n_nonzero, self.max_iter, self.tol)
        self.coef_ = np.divide(z, norms, out=np.zeros_like(z), where=norms > 0)
        self.support_ = np.flatnonzero(self.coef_)
        self.n_iter_ = info.n_iter
        self.residual_norms_ = info.residual_norms
        self.rank_deficient_ = info.rank_deficient
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_
