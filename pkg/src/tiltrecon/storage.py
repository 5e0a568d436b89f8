"""On-disk containers for images and sinograms.

Format: ``<name>.f32`` holds the raw pixels as little-endian float32 in
row-major order; ``<name>.json`` is a sidecar header with fields
``{shape, dtype, role, geometry}``.  ``role`` is "image" or "sinogram";
``geometry`` is the generating tilt geometry for sinograms and null for
images.  PNG export is for visualization only: values are min-max scaled
to [0, 255] (a constant image maps to 0).
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np
from PIL import Image as PILImage

from .errors import ConfigError, DimensionError
from .geometry import TiltGeometry

RAW_SUFFIX = ".f32"
HEADER_SUFFIX = ".json"


def atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_array(
    path: str,
    values: np.ndarray,
    role: str,
    geometry: TiltGeometry | None = None,
) -> None:
    """Write ``path + '.f32'`` and its sidecar header atomically."""
    if values.ndim != 2:
        raise DimensionError(f"expected a 2D array, got shape {values.shape}")
    if role not in ("image", "sinogram"):
        raise ConfigError(f"role must be 'image' or 'sinogram', got {role!r}")
    arr = np.asarray(values, dtype="<f4")
    header = {
        "shape": list(arr.shape),
        "dtype": "float32-le",
        "role": role,
        "geometry": geometry.to_dict() if geometry is not None else None,
    }
    atomic_write(path + RAW_SUFFIX, arr.tobytes(order="C"))
    atomic_write(path + HEADER_SUFFIX, (json.dumps(header, indent=1) + "\n").encode())


def load_array(path: str) -> tuple[np.ndarray, dict]:
    """Read an array saved by :func:`save_array`; returns (values, header)."""
    base = path
    for suf in (RAW_SUFFIX, HEADER_SUFFIX):
        if base.endswith(suf):
            base = base[: -len(suf)]
    with open(base + HEADER_SUFFIX) as f:
        header = json.load(f)
    if header.get("dtype") != "float32-le":
        raise ConfigError(f"unsupported dtype {header.get('dtype')!r} in {base}")
    shape = tuple(header["shape"])
    raw = np.fromfile(base + RAW_SUFFIX, dtype="<f4")
    if raw.size != shape[0] * shape[1]:
        raise DimensionError(
            f"{base}{RAW_SUFFIX} holds {raw.size} values, header says {shape}"
        )
    return raw.reshape(shape), header


def geometry_from_header(header: dict) -> TiltGeometry | None:
    g = header.get("geometry")
    return None if g is None else TiltGeometry.from_dict(g)


def export_png(path: str, values: np.ndarray) -> None:
    """Min-max scaled 8-bit grayscale preview."""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        scaled = (arr - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(arr)
    PILImage.fromarray(scaled.astype(np.uint8), mode="L").save(path)
