"""Decaying noise-level sequences for the diffusion loops.

Two kinds:

* ``geometric``: sigma_n = sigma1 * (sigmaN / sigma1)^((n-1)/(N-1)).
  Endpoints are exact; log sigma is affine in n.
* ``eq2``: sigma_n = sigma1 * ((1 - alpha)^2 + alpha * beta)^((n-1)/2),
  the generation schedule; the ratio of consecutive levels is the
  constant sqrt((1-alpha)^2 + alpha*beta).

Schedules are precomputed immutable arrays so runs are reproducible and
the exact levels can be logged verbatim into run manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# smallest noise level the reference denoiser is trained on
DEFAULT_SIGMA_FINAL = 0.03


@dataclass(frozen=True)
class NoiseSchedule:
    sigmas: np.ndarray
    kind: str                 # "geometric" | "eq2"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        sig = np.asarray(self.sigmas, dtype=np.float64)
        if sig.ndim != 1 or sig.size < 1:
            raise ParameterError("schedule must be a non-empty 1D sigma list")
        if not np.all(sig > 0):
            raise ParameterError("all sigma levels must be positive")
        if sig.size > 1 and not np.all(np.diff(sig) < 0):
            raise ParameterError("sigma levels must be strictly decreasing")
        object.__setattr__(self, "sigmas", sig)

    def __len__(self) -> int:
        return int(self.sigmas.size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def geometric_schedule(sigma_first: float, sigma_last: float, num_steps: int) -> NoiseSchedule:
    """Constant-ratio decay with both endpoints exact."""
    if num_steps < 2:
        raise ParameterError(f"geometric schedule needs N >= 2, got {num_steps}")
    if not sigma_first > sigma_last > 0:
        raise ParameterError(
            f"need sigma_first > sigma_last > 0, got ({sigma_first}, {sigma_last})"
        )
    n = np.arange(num_steps, dtype=np.float64)
    sig = sigma_first * (sigma_last / sigma_first) ** (n / (num_steps - 1))
    sig[0] = sigma_first
    sig[-1] = sigma_last
    return NoiseSchedule(
        sigmas=sig,
        kind="geometric",
        params={"sigma1": sigma_first, "sigmaN": sigma_last, "N": num_steps},
    )


def eq2_schedule(sigma_first: float, alpha: float, beta: float, num_steps: int) -> NoiseSchedule:
    """Generation schedule; requires decaying parameters."""
    if sigma_first <= 0:
        raise ParameterError(f"sigma_first must be positive, got {sigma_first}")
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if num_steps < 1:
        raise ParameterError(f"need N >= 1, got {num_steps}")
    decay = (1.0 - alpha) ** 2 + alpha * beta
    if not decay < 1.0:
        raise ParameterError(
            f"(1-alpha)^2 + alpha*beta = {decay} does not decay (must be < 1)"
        )
    n = np.arange(num_steps, dtype=np.float64)
    sig = sigma_first * decay ** (n / 2.0)
    return NoiseSchedule(
        sigmas=sig,
        kind="eq2",
        params={"sigma1": sigma_first, "alpha": alpha, "beta": beta, "N": num_steps},
    )
