"""The measurement operator: forward projection, adjoint, matrix, SVD, noise.

All arithmetic runs in float64 regardless of the input dtype; callers may
store images as float32 on disk (see ``storage``) but computations here
accumulate in 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapacityError, DimensionError, NumericalError, ParameterError
from .geometry import TiltGeometry

DEFAULT_MATRIX_BUDGET = 1 << 28  # bytes; admits 64x64 images with 64 angles


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full SVD of the explicit operator matrix, singular values descending."""

    u: np.ndarray        # (m, m)
    s: np.ndarray        # (min(m, n),), descending
    vt: np.ndarray       # (n, n)

    @property
    def condition_ratio(self) -> float:
        """sigma_min / sigma_max (0 when the matrix is rank deficient)."""
        return float(self.s[-1] / self.s[0])


class ProjectionOperator:
    """Parallel-beam limited-angle projector for a fixed image shape.

    Immutable after construction; ``apply`` and ``adjoint`` are pure, so a
    single instance is safe for concurrent read-only use.
    """

    kernel = "footprint"  # unit-square shadow integrated over detector bins

    def __init__(self, geometry: TiltGeometry, image_shape: tuple[int, int]):
        h, w = image_shape
        if h < 1 or w < 1:
            raise ParameterError(f"image shape must be positive, got {image_shape}")
        self.geometry = geometry
        self.image_shape = (int(h), int(w))
        self.num_bins = geometry.bins_for_width(int(w))
        self._cos = np.cos(geometry.angles_rad)
        self._sin = np.sin(geometry.angles_rad)

    @property
    def sinogram_shape(self) -> tuple[int, int]:
        return (self.geometry.num_angles, self.num_bins)

    # -- core linear maps ----------------------------------------------------

    def apply(self, image: np.ndarray) -> np.ndarray:
        """Forward projection: one sinogram row per tilt view."""
        if image.shape != self.image_shape:
            raise DimensionError(
                f"image shape {image.shape} != operator shape {self.image_shape}"
            )
        img = np.ascontiguousarray(image, dtype=np.float64)
        return _kernels.forward_kernel(img, self._cos, self._sin, self.num_bins)

    def adjoint(self, sinogram: np.ndarray) -> np.ndarray:
        """Exact transpose of :meth:`apply` (backprojection)."""
        if sinogram.shape != self.sinogram_shape:
            raise DimensionError(
                f"sinogram shape {sinogram.shape} != operator shape {self.sinogram_shape}"
            )
        sino = np.ascontiguousarray(sinogram, dtype=np.float64)
        h, w = self.image_shape
        return _kernels.adjoint_kernel(sino, self._cos, self._sin, h, w)

    # -- explicit matrix and spectrum -----------------------------------------

    def matrix_nbytes(self) -> int:
        m = self.geometry.num_angles * self.num_bins
        n = self.image_shape[0] * self.image_shape[1]
        return m * n * 8

    def build_matrix(self, budget_bytes: int = DEFAULT_MATRIX_BUDGET) -> np.ndarray:
        """Dense matrix whose column j is the projection of basis image j.

        Pixels are flattened row-major; sinograms row-major as
        (angle, bin).  Refuses to materialize past ``budget_bytes``.
        """
        need = self.matrix_nbytes()
        if need > budget_bytes:
            raise CapacityError(
                f"dense matrix needs {need} bytes, budget is {budget_bytes}"
            )
        h, w = self.image_shape
        return _kernels.matrix_kernel(h, w, self.num_bins, self._cos, self._sin)

    def svd(self, budget_bytes: int = DEFAULT_MATRIX_BUDGET) -> SpectralDecomposition:
        return svd(self.build_matrix(budget_bytes))

    # -- measurement simulation ------------------------------------------------

    def simulate_sinogram(
        self,
        image: np.ndarray,
        snr: float | None,
        rng: np.random.Generator,
    ) -> tuple[np.ndarray, float]:
        """Noisy measurement y = Ax + sigma_y * eps.

        ``sigma_y`` is set so RMS(Ax) / sigma_y equals ``snr``; pass
        ``snr=None`` to disable noise entirely (sigma_y = 0, y = Ax).
        Identical rng states give bit-identical sinograms.
        """
        clean = self.apply(image)
        if snr is None or np.isinf(snr):
            return clean, 0.0
        if snr <= 0:
            raise ParameterError(f"snr must be positive, got {snr}")
        sigma_y = float(np.sqrt(np.mean(clean**2, dtype=np.float64)) / snr)
        noisy = clean + sigma_y * rng.standard_normal(clean.shape)
        return noisy, sigma_y


def svd(matrix: np.ndarray) -> SpectralDecomposition:
    """Full SVD with descending singular values."""
    if not np.all(np.isfinite(matrix)):
        raise NumericalError("matrix contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(matrix, full_matrices=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    return SpectralDecomposition(u=u, s=s, vt=vt)
