"""Exception hierarchy.

Exit-code mapping used by the CLI: ConfigError -> 2, numeric/runtime
errors -> 3, transport errors -> 4.
"""


class TiltReconError(Exception):
    """Base class for all package errors."""


class DimensionError(TiltReconError):
    """Array shape does not match the operator or geometry."""


class ParameterError(TiltReconError):
    """Invalid parameter value (schedule, config, denoiser)."""


class CapacityError(TiltReconError):
    """A memory or size budget would be exceeded."""


class NumericalError(TiltReconError):
    """Numerical failure (non-convergence, non-finite values)."""


class StepSizeError(NumericalError):
    """Gradient descent diverged for the given step size."""


class ConfigError(TiltReconError):
    """Run configuration invalid (unknown key, missing path, bad value)."""


class ConnectivityError(TiltReconError):
    """Remote denoiser unreachable or timed out."""


class ProtocolError(TiltReconError):
    """Remote denoiser wire protocol violation."""
