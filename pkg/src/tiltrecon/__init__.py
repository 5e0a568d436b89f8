"""Limited-angle tomography reconstruction with diffusion-style denoising priors."""

from .backend import active_backend
from .denoisers import (Denoiser, DenseGaussianDenoiser, DiagonalGaussianDenoiser,
                        GaussianPriorDenoiser, PassthroughDenoiser,
                        PatchifiedDenoiser, StationaryGaussianDenoiser,
                        bump_weight, gaussian_blur_psd)
from .geometry import TiltGeometry
from .metrics import SsimParams, highband_energy_ratio, mse, ssim, standard_error
from .projector import ProjectionOperator, SpectralDecomposition, svd
from .remote import RemoteDenoiser, connect_denoiser
from .schedules import NoiseSchedule, eq2_schedule, geometric_schedule
from .solvers import (ReconstructionConfig, RunTrace, algebraic_reconstruct,
                      auto_tune_lambda, batch_evaluate, ddgm_reconstruct,
                      ddrm_reconstruct, dps_reconstruct, dps_step,
                      gradient_descent_data, reconstruct, sample_unconditional)

__version__ = "0.1.0"

__all__ = [
    "Denoiser", "DenseGaussianDenoiser", "DiagonalGaussianDenoiser",
    "GaussianPriorDenoiser", "NoiseSchedule", "PassthroughDenoiser",
    "PatchifiedDenoiser", "ProjectionOperator", "ReconstructionConfig",
    "RemoteDenoiser", "RunTrace", "SpectralDecomposition", "SsimParams",
    "StationaryGaussianDenoiser", "TiltGeometry", "active_backend",
    "algebraic_reconstruct", "auto_tune_lambda", "batch_evaluate",
    "bump_weight", "connect_denoiser", "ddgm_reconstruct", "ddrm_reconstruct",
    "dps_reconstruct", "dps_step", "eq2_schedule", "gaussian_blur_psd",
    "geometric_schedule", "gradient_descent_data", "highband_energy_ratio",
    "mse", "reconstruct", "sample_unconditional", "ssim", "standard_error",
    "svd",
]
