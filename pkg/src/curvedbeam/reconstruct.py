"""Curved-beam reconstruction as a scikit-learn style transformer."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .banana import DEFAULT_KAPPA, DEFAULT_SAMPLES, fit_channel_curve
from .forward import MeasurementSet
from .mbll import (CORRECTION_MODES, UPSAMPLE_FACTOR, AbsorptionMap2D, ChannelEstimate,
                   backproject, cubic_upsample, estimate_mu_a, optical_density,
                   points_to_cells, select_reference)
from .phantom import enumerate_channels

REFERENCE_MODES = ("per_source", "global")


def check_measurements(X) -> MeasurementSet:
    """Validate that ``X`` is a complete :class:`MeasurementSet`."""
    if not isinstance(X, MeasurementSet):
        raise TypeError(f"expected a MeasurementSet, got {type(X).__name__}")
    X.check_complete()
    return X


class CurvedBeamReconstructor(TransformerMixin, BaseEstimator):
    """Back-project differential Beer-Lambert estimates along banana paths.

    ``fit`` derives the channel geometry (curves, path lengths, grid cells)
    from a measurement set's layout; ``transform`` turns measurement sets
    with the same layout into :class:`AbsorptionMap2D` objects.

    Parameters
    ----------
    mu_a_background, mu_s_prime : float
        Background optics in cm^-1, used for path lengths.
    kappa : float
        Apex depth of each curve as a fraction of the optode separation.
    n_samples : int
        Odd number of points sampled along each curve.
    correction_mode : {"differential", "corrected"}
        Whether to add back the reference-channel term.
    clamp_negative : bool
        Clip negative channel estimates to 0 before rasterisation.
    upsample_factor : int
        Cubic upsampling factor (``factor - 1`` inserted values per gap).
    reference_mode : {"per_source", "global"}
        One reference per source group, or a single reference for all.
    raw_shape : tuple or None
        Raw grid ``(rows, cols)``; defaults to ``(n_sources, n_detectors)``.
    fill_value : float or None
        Value of cells no curve touches; ``None`` uses the smallest positive
        channel estimate.
    """

    def __init__(self, mu_a_background=0.25, mu_s_prime=20.0, kappa=DEFAULT_KAPPA,
                 n_samples=DEFAULT_SAMPLES, correction_mode="differential", clamp_negative=True,
                 upsample_factor=UPSAMPLE_FACTOR, reference_mode="per_source",
                 raw_shape=None, fill_value=None):
        self.mu_a_background = mu_a_background
        self.mu_s_prime = mu_s_prime
        self.kappa = kappa
        self.n_samples = n_samples
        self.correction_mode = correction_mode
        self.clamp_negative = clamp_negative
        self.upsample_factor = upsample_factor
        self.reference_mode = reference_mode
        self.raw_shape = raw_shape
        self.fill_value = fill_value

    def fit(self, X, y=None):
        X = check_measurements(X)
        if self.correction_mode not in CORRECTION_MODES:
            raise ValueError(f"correction_mode must be one of {CORRECTION_MODES}")
        if self.reference_mode not in REFERENCE_MODES:
            raise ValueError(f"reference_mode must be one of {REFERENCE_MODES}")
        layout = X.layout
        self.layout_ = layout
        self.channels_ = enumerate_channels(layout)
        self.raw_shape_ = tuple(self.raw_shape or (layout.n_sources, layout.n_detectors))
        self.curves_ = [fit_channel_curve(ch, layout, self.kappa, self.n_samples,
                                          self.mu_a_background, self.mu_s_prime)
                        for ch in self.channels_]
        self.path_lengths_ = np.array([c.path_length_L for c in self.curves_])
        extent = layout.cross_section.extent
        self.cells_ = [points_to_cells(c.samples, self.raw_shape_, extent) for c in self.curves_]
        return self

    def _check_layout(self, X):
        check_is_fitted(self, "curves_")
        X = check_measurements(X)
        if not X.layout.same_geometry(self.layout_):
            raise ValueError("measurement layout differs from the fitted layout")
        return X

    def reference_channels(self, X) -> dict[int, int]:
        """Map each source index to the position of its reference channel.

        In ``global`` mode every source maps to the same channel.
        """
        X = self._check_layout(X)
        lookup = X.lookup()
        # sources are never measured; a unit nominal source intensity is used for OD
        ods = np.array([optical_density(1.0, lookup[(c.source_index, c.detector_index)])
                        for c in self.channels_])
        seps = np.array([c.separation_d for c in self.channels_])
        dets = np.array([c.detector_index for c in self.channels_])
        srcs = np.array([c.source_index for c in self.channels_])
        if self.reference_mode == "global":
            k = select_reference(seps, ods, dets)
            return {int(s): k for s in np.unique(srcs)}
        refs = {}
        for s in np.unique(srcs):
            pos = np.flatnonzero(srcs == s)
            refs[int(s)] = int(pos[select_reference(seps[pos], ods[pos], dets[pos])])
        return refs

    def estimate_channels(self, X) -> list[ChannelEstimate]:
        """Per-channel absorption estimates in channel order."""
        X = self._check_layout(X)
        lookup = X.lookup()
        refs = self.reference_channels(X)
        ref_positions = set(refs.values())
        out = []
        for k, ch in enumerate(self.channels_):
            i_j = lookup[(ch.source_index, ch.detector_index)]
            od = optical_density(1.0, i_j)
            r = refs[ch.source_index]
            if k in ref_positions and (self.reference_mode == "per_source" or k == r):
                out.append(ChannelEstimate(ch, od, float(self.mu_a_background), True))
                continue
            ref = self.channels_[r]
            i_ref = lookup[(ref.source_index, ref.detector_index)]
            mu = estimate_mu_a(i_ref, i_j, self.path_lengths_[k], self.correction_mode,
                               L_ref=self.path_lengths_[r], mu_o=self.mu_a_background)
            out.append(ChannelEstimate(ch, od, float(mu), False))
        return out

    def transform(self, X) -> AbsorptionMap2D:
        estimates = self.estimate_channels(X)
        keep = [k for k, e in enumerate(estimates) if not e.is_reference]
        values = np.array([estimates[k].mu_a_est for k in keep])
        if self.clamp_negative:
            values = np.maximum(values, 0.0)
        fill = self.fill_value
        if fill is None:
            pos = values[values > 0]
            fill = float(pos.min()) if pos.size else float(self.mu_a_background)
        raw, counts = backproject(values, [self.cells_[k] for k in keep], self.raw_shape_, fill)
        up = cubic_upsample(raw, self.upsample_factor)
        return AbsorptionMap2D(raw, counts, up, X.depth_z, self.layout_.cross_section.extent,
                               self.upsample_factor)


def reconstruct2d(measurements: MeasurementSet, mu_a_background: float = 0.25,
                  mu_s_prime: float = 20.0, **params) -> AbsorptionMap2D:
    """One-shot convenience wrapper around :class:`CurvedBeamReconstructor`."""
    est = CurvedBeamReconstructor(mu_a_background=mu_a_background, mu_s_prime=mu_s_prime, **params)
    return est.fit_transform(measurements)
