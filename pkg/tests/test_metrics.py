import math

import numpy as np
import pytest

from tiltrecon.errors import DimensionError, ParameterError
from tiltrecon.metrics import (SsimParams, highband_energy_ratio, mse,
                               report_csv, report_table, ssim, standard_error)


def ssim_oracle(a, b, params: SsimParams, data_range: float) -> float:
    """Independent SSIM: explicit per-window loops, no shared code path."""
    w = params.window_size
    g1 = params.window()
    win = np.outer(g1, g1)
    c1 = (params.k1 * data_range) ** 2
    c2 = (params.k2 * data_range) ** 2
    h, ww = a.shape
    vals = []
    for i in range(h - w + 1):
        for j in range(ww - w + 1):
            pa = a[i:i + w, j:j + w]
            pb = b[i:i + w, j:j + w]
            mu_a = float((win * pa).sum())
            mu_b = float((win * pb).sum())
            var_a = float((win * pa * pa).sum()) - mu_a**2
            var_b = float((win * pb * pb).sum()) - mu_b**2
            cov = float((win * pa * pb).sum()) - mu_a * mu_b
            vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                        / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(vals))


def test_mse_trivials(rng):
    a = rng.standard_normal((6, 6))
    assert mse(a, a) == 0.0
    assert mse(np.zeros((4, 4)), np.ones((4, 4))) == 1.0
    with pytest.raises(DimensionError):
        mse(np.zeros((2, 2)), np.zeros((3, 3)))


def test_mse_brute_force_oracle(rng):
    a = rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4))
    acc = 0.0
    for i in range(4):
        for j in range(4):
            acc += (float(a[i, j]) - float(b[i, j])) ** 2
    assert mse(a, b) == pytest.approx(acc / 16.0, abs=1e-12)


def test_mse_properties(rng):
    a = rng.standard_normal((5, 5))
    b = rng.standard_normal((5, 5))
    assert mse(a, b) >= 0
    assert mse(a, b) == pytest.approx(mse(b, a), rel=1e-15)


def test_ssim_self_is_one(rng):
    a = rng.standard_normal((16, 16))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)


def test_ssim_symmetry(rng):
    a = rng.standard_normal((16, 16))
    b = rng.standard_normal((16, 16))
    p = SsimParams(data_range=4.0)
    assert ssim(a, b, p) == pytest.approx(ssim(b, a, p), abs=1e-12)


def test_ssim_matches_independent_oracle(rng):
    p = SsimParams(data_range=2.0)
    a = rng.standard_normal((16, 16))
    b = a + 0.4 * rng.standard_normal((16, 16))
    assert ssim(a, b, p) == pytest.approx(ssim_oracle(a, b, p, 2.0), abs=1e-7)


def test_ssim_bounded_and_small_image_rejected(rng):
    a = rng.standard_normal((12, 12))
    b = rng.standard_normal((12, 12))
    assert -1.0 <= ssim(a, b) <= 1.0
    with pytest.raises(DimensionError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_ssim_rescale_invariance(rng):
    # every SSIM term scales quadratically, so a common rescale with a
    # matching data_range leaves the score unchanged (shifts do not: the
    # luminance term is not shift-invariant)
    a = rng.standard_normal((14, 14))
    b = rng.standard_normal((14, 14))
    base = ssim(a, b, SsimParams(data_range=3.0))
    assert ssim(5.0 * a, 5.0 * b, SsimParams(data_range=15.0)) == \
        pytest.approx(base, rel=1e-9)
    assert ssim(-3.0 * a, -3.0 * b, SsimParams(data_range=9.0)) == \
        pytest.approx(base, rel=1e-9)


def test_standard_error_values():
    assert standard_error([7.0, 7.0, 7.0]) == 0.0
    assert standard_error([0.0, 2.0]) == pytest.approx(1.0, rel=1e-14)
    assert standard_error([4.2]) == 0.0
    with pytest.raises(ParameterError):
        standard_error([])


def test_standard_error_scaling(rng):
    # se shrinks like 1/sqrt(n) under replication (3-sigma statistical band)
    base = rng.standard_normal(200)
    se1 = standard_error(base)
    se4 = standard_error(np.concatenate([rng.standard_normal(200) for _ in range(4)]))
    assert se4 == pytest.approx(se1 / 2.0, rel=0.35)


def test_highband_constant_is_zero():
    assert highband_energy_ratio(np.full((16, 16), 3.3)) == 0.0
    assert highband_energy_ratio(np.zeros((16, 16))) == 0.0


def test_highband_white_noise_matches_area_fraction(rng):
    # Monte-Carlo expectation: white noise spreads power uniformly over
    # frequencies, so the ratio concentrates near the high-band area share
    n = 64
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    area = float(np.mean(np.hypot(fy, fx) > 0.25))
    ratios = [highband_energy_ratio(rng.standard_normal((n, n)))
              for _ in range(20)]
    assert np.mean(ratios) == pytest.approx(area, abs=0.02)


def test_highband_blur_lowers_ratio(rng):
    noise = rng.standard_normal((32, 32))
    kernel = np.exp(-0.5 * (np.arange(-3, 4) / 1.2) ** 2)
    kernel /= kernel.sum()
    blurred = np.apply_along_axis(
        lambda r: np.convolve(r, kernel, mode="same"), 1, noise)
    blurred = np.apply_along_axis(
        lambda c: np.convolve(c, kernel, mode="same"), 0, blurred)
    assert highband_energy_ratio(blurred) < highband_energy_ratio(noise)
    with pytest.raises(DimensionError):
        highband_energy_ratio(np.zeros((4, 4)))


def test_report_emitters():
    rows = [{"method": "ddgm", "grad_evals": 1250, "net_evals": 50,
             "mse_mean": 0.14, "mse_se": 0.004, "ssim_mean": 0.62,
             "ssim_se": 0.005}]
    table = report_table(rows)
    assert "ddgm" in table and "0.1400 +- 0.0040" in table
    csv_text = report_csv(rows)
    assert csv_text.splitlines()[0] == \
        "method,grad_evals,net_evals,mse_mean,mse_se,ssim_mean,ssim_se"
    assert "1250" in csv_text
