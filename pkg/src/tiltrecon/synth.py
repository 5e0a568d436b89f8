"""Synthetic ground-truth generators used at desk scale.

Two families: stationary Gaussian textures (the prior that the analytic
denoiser knows exactly, which makes whole-pipeline tests verifiable) and
structured blob phantoms (superposed soft ellipses, normalized to
zero mean / unit variance).
"""

from __future__ import annotations

import numpy as np

from .denoisers import StationaryGaussianDenoiser, gaussian_blur_psd
from .errors import ParameterError

GENERATORS = ("gaussian", "blobs")


def gaussian_texture_denoiser(shape: tuple[int, int], corr_length: float = 2.0,
                              variance: float = 1.0) -> StationaryGaussianDenoiser:
    """The exact prior behind :func:`gaussian_texture` samples."""
    psd = gaussian_blur_psd(shape, corr_length, variance)
    return StationaryGaussianDenoiser(np.zeros(shape), psd)


def gaussian_texture(shape, rng: np.random.Generator, corr_length: float = 2.0,
                     variance: float = 1.0) -> np.ndarray:
    return gaussian_texture_denoiser(shape, corr_length, variance).sample_prior(rng)


def blob_phantom(shape, rng: np.random.Generator, num_blobs: int = 12) -> np.ndarray:
    """Random soft ellipses on a flat background, standardized."""
    h, w = shape
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    img = np.zeros((h, w), dtype=np.float64)
    for _ in range(num_blobs):
        cy, cx = rng.uniform(0.15, 0.85) * h, rng.uniform(0.15, 0.85) * w
        ry, rx = rng.uniform(0.04, 0.22) * h, rng.uniform(0.04, 0.22) * w
        amp = rng.uniform(-1.0, 1.0)
        theta = rng.uniform(0, np.pi)
        dy, dx = ii - cy, jj - cx
        u = dy * np.cos(theta) + dx * np.sin(theta)
        v = -dy * np.sin(theta) + dx * np.cos(theta)
        img += amp * np.exp(-0.5 * ((u / ry) ** 2 + (v / rx) ** 2))
    std = img.std()
    if std > 0:
        img = (img - img.mean()) / std
    return img


def generate(kind: str, shape, rng: np.random.Generator, **kwargs) -> np.ndarray:
    if kind == "gaussian":
        return gaussian_texture(shape, rng, **kwargs)
    if kind == "blobs":
        return blob_phantom(shape, rng, **kwargs)
    raise ParameterError(f"unknown generator {kind!r} (choose from {GENERATORS})")
