"""Acquisition geometry for parallel-beam tilt series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class TiltGeometry:
    """Uniformly spaced tilt views over an inclusive angular range.

    Angles are in degrees; 0 degrees projects along image columns (the
    detector then reads per-column sums).  The angle list is an inclusive
    linspace over [angle_min, angle_max] with ``num_angles`` points, so
    both endpoints are sampled.  Detector pitch equals pixel pitch; by
    default there is one detector bin per image column.
    """

    num_angles: int
    angle_min: float = -60.0
    angle_max: float = 60.0
    detector_bins: int | None = None

    def __post_init__(self):
        if self.num_angles < 1:
            raise ParameterError(f"num_angles must be >= 1, got {self.num_angles}")
        if self.num_angles > 1 and not self.angle_min < self.angle_max:
            raise ParameterError(
                f"angle_min must be < angle_max, got [{self.angle_min}, {self.angle_max}]"
            )
        if self.detector_bins is not None and self.detector_bins < 1:
            raise ParameterError("detector_bins must be >= 1")

    @property
    def angles_deg(self) -> np.ndarray:
        if self.num_angles == 1:
            return np.array([self.angle_min], dtype=np.float64)
        return np.linspace(self.angle_min, self.angle_max, self.num_angles)

    @property
    def angles_rad(self) -> np.ndarray:
        return np.deg2rad(self.angles_deg)

    def bins_for_width(self, width: int) -> int:
        return self.detector_bins if self.detector_bins is not None else width

    def to_dict(self) -> dict:
        return {
            "num_angles": self.num_angles,
            "angle_min": self.angle_min,
            "angle_max": self.angle_max,
            "detector_bins": self.detector_bins,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TiltGeometry":
        return cls(
            num_angles=int(d["num_angles"]),
            angle_min=float(d.get("angle_min", -60.0)),
            angle_max=float(d.get("angle_max", 60.0)),
            detector_bins=None if d.get("detector_bins") is None else int(d["detector_bins"]),
        )
