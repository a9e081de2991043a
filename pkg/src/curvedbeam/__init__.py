"""Curved-beam diffuse optical tomography.

Banana-path back-projection of differential modified Beer-Lambert
estimates, a finite-volume CW diffusion forward model for synthetic data,
a CoSaMP baseline and image-quality metrics.
"""
from .banana import (BananaCurve, RosenbrockParams, dpf, fit_channel_curve, path_length,
                     rosenbrock_eval, rosenbrock_grad)
from .cosamp import CoSaMPRegressor, SensingSystem, build_sensing, cosamp, cosamp_solve
from .forward import DiffusionGrid, MeasurementSet, assemble, simulate_measurements, solve_fluence
from .mbll import (AbsorptionMap2D, ChannelEstimate, backproject, cubic_upsample, estimate_mu_a,
                   optical_density, select_reference)
from .metrics import MetricReport, evaluate, localize, mse, psnr, ssim_global
from .phantom import (Channel, CrossSection, Inclusion, OptodeLayout, Phantom, build_layout,
                      enumerate_channels, mu_a_at)
from .reconstruct import CurvedBeamReconstructor, reconstruct2d
from .volume import Volume3D, stack_and_interpolate

__version__ = "0.1.0"
