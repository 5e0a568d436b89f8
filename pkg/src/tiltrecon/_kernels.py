"""Projector hot loops: numba kernels plus a pure numpy fallback.

Discretization ("footprint" kernel): every pixel is a unit square; its
shadow on the detector axis at angle theta is the trapezoid
``box(|cos|) * box(|sin|)`` (unit mass).  The matrix weight of pixel p in
detector bin t is the trapezoid mass falling inside ``[t-1/2, t+1/2]``,
evaluated from the closed-form CDF.  Consequences used throughout the
package:

* the weights for one pixel sum to exactly 1 at every angle, so sinogram
  row sums preserve the image mass exactly (bins tile the detector axis);
* at 0 degrees the weights reduce to Kronecker deltas on the pixel's
  column, so the projection is the per-column sum;
* the adjoint recomputes identical weights and gathers, so it is the
  exact transpose of the forward map.

A pixel's footprint spans at most 3 bins (support width 1 + |cos| + |sin|
<= 1 + sqrt(2)), which keeps both loops O(3) per pixel-angle pair.

Coordinates: pixel (i, j) sits at (row i, column j), both zero-based;
rotation is about the image center ((H-1)/2, (W-1)/2); the detector
coordinate of a pixel is ``(j-cx)*cos + (i-cy)*sin + (nb-1)/2``.  Bins
falling outside [0, nb) are dropped.
"""

import math

import numpy as np

from .backend import ACTIVE_BACKEND, NUMBA_AVAILABLE

_EPS_AXIS = 1e-12  # below this |sin| or |cos| the trapezoid degenerates to a box


# ---------------------------------------------------------------------------
# pure numpy fallback
# ---------------------------------------------------------------------------

def _cdf_numpy(tau, hi, lo):
    """Vectorized trapezoid CDF; hi >= lo >= 0, hi > 0."""
    if lo < _EPS_AXIS:
        return np.clip(0.5 + tau / hi, 0.0, 1.0)
    l0 = 0.5 * (hi - lo)
    l1 = 0.5 * (hi + lo)
    ramp_lo = (tau + l1) ** 2 / (2.0 * hi * lo)
    ramp_hi = 1.0 - (l1 - tau) ** 2 / (2.0 * hi * lo)
    mid = 0.5 + tau / hi
    out = np.where(tau <= -l1, 0.0,
          np.where(tau < -l0, ramp_lo,
          np.where(tau <= l0, mid,
          np.where(tau < l1, ramp_hi, 1.0))))
    return out


def _angle_taps_numpy(h, w, nb, cos_t, sin_t):
    """Per-pixel (bin index, weight) taps for one angle, flattened row-major.

    Returns (t0, w0, w1, w2) where t0 is the first of three consecutive
    candidate bins; weights for out-of-range bins must be masked by the
    caller.
    """
    cy = 0.5 * (h - 1)
    cx = 0.5 * (w - 1)
    tc = 0.5 * (nb - 1)
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    tau = ((jj - cx) * cos_t + (ii - cy) * sin_t + tc).ravel()
    hi = max(abs(cos_t), abs(sin_t))
    lo = min(abs(cos_t), abs(sin_t))
    l1 = 0.5 * (hi + lo)
    t0 = np.ceil(tau - 0.5 - l1).astype(np.int64)
    ws = []
    for k in range(3):
        t = t0 + k
        ws.append(_cdf_numpy(t - tau + 0.5, hi, lo) - _cdf_numpy(t - tau - 0.5, hi, lo))
    return t0, ws[0], ws[1], ws[2]


def _forward_numpy(img, cos_a, sin_a, nb):
    h, w = img.shape
    na = cos_a.shape[0]
    out = np.zeros((na, nb), dtype=np.float64)
    flat = img.ravel().astype(np.float64, copy=False)
    for a in range(na):
        t0, w0, w1, w2 = _angle_taps_numpy(h, w, nb, cos_a[a], sin_a[a])
        row = out[a]
        for k, wk in enumerate((w0, w1, w2)):
            t = t0 + k
            ok = (t >= 0) & (t < nb)
            np.add.at(row, t[ok], flat[ok] * wk[ok])
    return out


def _adjoint_numpy(sino, cos_a, sin_a, h, w):
    na, nb = sino.shape
    acc = np.zeros(h * w, dtype=np.float64)
    for a in range(na):
        t0, w0, w1, w2 = _angle_taps_numpy(h, w, nb, cos_a[a], sin_a[a])
        row = sino[a].astype(np.float64, copy=False)
        for k, wk in enumerate((w0, w1, w2)):
            t = t0 + k
            ok = (t >= 0) & (t < nb)
            acc[ok] += row[np.clip(t, 0, nb - 1)][ok] * wk[ok]
    return acc.reshape(h, w)


def _matrix_numpy(h, w, nb, cos_a, sin_a):
    """Dense operator matrix, rows = (angle, bin) pairs, columns = pixels."""
    na = cos_a.shape[0]
    mat = np.zeros((na * nb, h * w), dtype=np.float64)
    cols = np.arange(h * w)
    for a in range(na):
        t0, w0, w1, w2 = _angle_taps_numpy(h, w, nb, cos_a[a], sin_a[a])
        for k, wk in enumerate((w0, w1, w2)):
            t = t0 + k
            ok = (t >= 0) & (t < nb) & (wk > 0.0)
            mat[a * nb + t[ok], cols[ok]] = wk[ok]
    return mat


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:
    from numba import njit, prange

    @njit(cache=True, inline="always")
    def _cdf_scalar(tau, hi, lo):
        if lo < _EPS_AXIS:
            v = 0.5 + tau / hi
            if v < 0.0:
                return 0.0
            if v > 1.0:
                return 1.0
            return v
        l0 = 0.5 * (hi - lo)
        l1 = 0.5 * (hi + lo)
        if tau <= -l1:
            return 0.0
        if tau < -l0:
            return (tau + l1) * (tau + l1) / (2.0 * hi * lo)
        if tau <= l0:
            return 0.5 + tau / hi
        if tau < l1:
            return 1.0 - (l1 - tau) * (l1 - tau) / (2.0 * hi * lo)
        return 1.0

    @njit(cache=True, parallel=True)
    def _forward_numba(img, cos_a, sin_a, nb):
        h, w = img.shape
        na = cos_a.shape[0]
        out = np.zeros((na, nb), dtype=np.float64)
        cy = 0.5 * (h - 1)
        cx = 0.5 * (w - 1)
        tc = 0.5 * (nb - 1)
        # each angle owns one output row: deterministic under any thread count
        for a in prange(na):
            c = cos_a[a]
            s = sin_a[a]
            hi = abs(c)
            lo = abs(s)
            if lo > hi:
                hi, lo = lo, hi
            l1 = 0.5 * (hi + lo)
            for i in range(h):
                base = (i - cy) * s + tc - cx * c
                for j in range(w):
                    v = img[i, j]
                    tau = base + j * c
                    t0 = int(math.ceil(tau - 0.5 - l1))
                    for t in range(t0, t0 + 3):
                        if 0 <= t < nb:
                            wt = _cdf_scalar(t - tau + 0.5, hi, lo) - _cdf_scalar(
                                t - tau - 0.5, hi, lo)
                            out[a, t] += v * wt
        return out

    @njit(cache=True, parallel=True)
    def _adjoint_numba(sino, cos_a, sin_a, h, w):
        na, nb = sino.shape
        out = np.zeros((h, w), dtype=np.float64)
        cy = 0.5 * (h - 1)
        cx = 0.5 * (w - 1)
        tc = 0.5 * (nb - 1)
        for i in prange(h):
            for j in range(w):
                acc = 0.0
                for a in range(na):
                    c = cos_a[a]
                    s = sin_a[a]
                    hi = abs(c)
                    lo = abs(s)
                    if lo > hi:
                        hi, lo = lo, hi
                    l1 = 0.5 * (hi + lo)
                    tau = (j - cx) * c + (i - cy) * s + tc
                    t0 = int(math.ceil(tau - 0.5 - l1))
                    for t in range(t0, t0 + 3):
                        if 0 <= t < nb:
                            wt = _cdf_scalar(t - tau + 0.5, hi, lo) - _cdf_scalar(
                                t - tau - 0.5, hi, lo)
                            acc += sino[a, t] * wt
                out[i, j] = acc
        return out
else:  # pragma: no cover
    _forward_numba = None
    _adjoint_numba = None


if ACTIVE_BACKEND == "numba":
    forward_kernel = _forward_numba
    adjoint_kernel = _adjoint_numba
else:
    forward_kernel = _forward_numpy
    adjoint_kernel = _adjoint_numpy

matrix_kernel = _matrix_numpy
