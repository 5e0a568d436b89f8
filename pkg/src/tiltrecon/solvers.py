"""Reconstruction and generation procedures.

All solvers are single-threaded, consume a seeded generator created from
the config, and are bit-reproducible: identical config + denoiser +
inputs give byte-identical outputs.  Two reduction identities are
preserved exactly and exercised by the tests:

* the guided sampler with zeta = 0 walks the same arithmetic as the
  unconditional sampler (shared step helper, shared rng draw order);
* the main loop with a pass-through denoiser and K = 0 reduces to pure
  annealed noise accumulation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .denoisers import Denoiser
from .errors import CapacityError, ParameterError, StepSizeError
from .metrics import mse, ssim, standard_error
from .projector import ProjectionOperator, SpectralDecomposition
from .schedules import NoiseSchedule

METHODS = ("algebraic", "ddgm", "dps", "ddrm")

_DIVERGENCE_FACTOR = 10.0
_DEGENERATE_LAMBDA = 1.0  # returned when the operator has zero gain


@dataclass
class ReconstructionConfig:
    method: str = "ddgm"
    schedule: NoiseSchedule | None = None
    lam: float | None = None        # gradient step size; None -> auto-tuned
    k_steps: int = 25               # gradient steps per denoising step
    seed: int = 0
    # guided-sampler (dps) parameters
    zeta: float = 0.0
    alpha: float = 0.183
    beta: float = 0.5
    rescaled: bool = True
    # spectral-baseline (ddrm) parameters
    eta: float = 1.0
    eta_b: float = 1.0
    sv_threshold: float = 1.0 / 30.0
    sigma_y: float = 0.0

    def validate(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.lam is not None and self.lam <= 0:
            raise ParameterError("lam must be positive")
        if self.k_steps < 0:
            raise ParameterError("k_steps must be >= 0")
        if self.zeta < 0:
            raise ParameterError("zeta must be >= 0")
        if not 0 <= self.eta <= 1 or not 0 <= self.eta_b <= 1:
            raise ParameterError("eta and eta_b must lie in [0, 1]")
        return self


@dataclass
class RunTrace:
    """One record per outer iteration plus evaluation counters."""

    steps: list[int] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)
    data_residuals: list[float] = field(default_factory=list)
    mses: list[float | None] = field(default_factory=list)
    grad_evals: int = 0
    denoiser_evals: int = 0

    def record(self, n, sigma, residual, mse):
        self.steps.append(int(n))
        self.sigmas.append(float(sigma))
        self.data_residuals.append(float(residual))
        self.mses.append(None if mse is None else float(mse))

    def write_csv(self, path: str):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["n", "sigma", "data_residual", "mse_opt"])
            for n, s, r, m in zip(self.steps, self.sigmas, self.data_residuals, self.mses):
                w.writerow([n, repr(s), repr(r), "" if m is None else repr(m)])


def data_residual(op: ProjectionOperator, x: np.ndarray, y: np.ndarray) -> float:
    r = op.apply(x) - y
    return float(np.sum(r * r, dtype=np.float64))


def _mse_or_none(x, x_true):
    if x_true is None:
        return None
    return float(np.mean((x - x_true) ** 2, dtype=np.float64))


# ---------------------------------------------------------------------------
# data-fitting gradient descent
# ---------------------------------------------------------------------------

def gradient_descent_data(x: np.ndarray, y: np.ndarray, op: ProjectionOperator,
                          lam: float, k_steps: int) -> np.ndarray:
    """K updates of x <- x - lam * 2 A^T (Ax - y); K = 0 returns x unchanged.

    Aborts with StepSizeError when the residual grows past 10x its value
    at entry (runaway step size).
    """
    if lam <= 0:
        raise ParameterError("lam must be positive")
    if k_steps == 0:
        return x
    r = op.apply(x) - y
    start = float(np.sum(r * r, dtype=np.float64))
    limit = _DIVERGENCE_FACTOR * start
    for _ in range(k_steps):
        x = x - lam * 2.0 * op.adjoint(r)
        r = op.apply(x) - y
        now = float(np.sum(r * r, dtype=np.float64))
        if not math.isfinite(now) or now > limit:
            raise StepSizeError(
                f"residual grew from {start:.6g} to {now:.6g}; lam={lam} too large"
            )
    return x


def auto_tune_lambda(op: ProjectionOperator, y: np.ndarray,
                     probe_steps: int = 20) -> float:
    """Largest probed step size that keeps the residual decreasing.

    Doubles an upper bound until a 20-step probe from x=0 stops decreasing
    monotonically, then bisects (geometrically) down to a 5% window and
    returns the largest tested passing value, clamped at 0.9 / sigma_max^2.
    The clamp matters: step sizes at the marginal edge 1/sigma_max^2 can
    pass a short probe yet leave the top mode oscillating without decay,
    which would break residual monotonicity inside long solver runs.
    Deterministic.  Degenerate cases: a zero operator accepts any step and
    returns 1.0; if even the seed value 1/(2 sigma_max^2) fails the probe,
    that estimate is returned as-is.
    """
    h, w = op.image_shape
    v = np.ones((h, w), dtype=np.float64)
    v[0, 0] += 0.5  # break symmetry for power iteration
    smax2 = 0.0
    for _ in range(200):
        av = op.apply(v)
        nv = op.adjoint(av)
        norm = float(np.sqrt(np.sum(nv * nv)))
        if norm == 0.0:
            smax2 = 0.0
            break
        v = nv / norm
        smax2 = float(np.sum(op.apply(v) ** 2))
    if smax2 < 1e-30:
        return _DEGENERATE_LAMBDA
    stability_cap = 0.9 / smax2

    def probe(lam: float) -> bool:
        x = np.zeros((h, w), dtype=np.float64)
        r = op.apply(x) - y
        prev = float(np.sum(r * r, dtype=np.float64))
        for _ in range(probe_steps):
            g = 2.0 * op.adjoint(r)
            if float(np.sum(g * g)) == 0.0:
                return True  # zero gradient: nothing can change
            x = x - lam * g
            r = op.apply(x) - y
            now = float(np.sum(r * r, dtype=np.float64))
            if not math.isfinite(now) or now >= prev:
                return False
            prev = now
        return True

    fallback = 1.0 / (2.0 * smax2)
    if not probe(fallback):
        return fallback
    lo = fallback
    hi = fallback
    for _ in range(40):
        hi = lo * 2.0
        if not probe(hi):
            break
        lo = hi
    else:
        return min(lo, stability_cap)  # everything passed: degenerate problem
    while hi / lo > 1.05:
        mid = math.sqrt(lo * hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return min(lo, stability_cap)


def algebraic_reconstruct(y: np.ndarray, op: ProjectionOperator,
                          lam: float, k_steps: int) -> np.ndarray:
    """Early-stopped gradient descent from x = 0 (no prior)."""
    x = np.zeros(op.image_shape, dtype=np.float64)
    return gradient_descent_data(x, y, op, lam, k_steps)


# ---------------------------------------------------------------------------
# main loop: gradient fitting interleaved with noise injection + denoising
# ---------------------------------------------------------------------------

def ddgm_reconstruct(y: np.ndarray, op: ProjectionOperator, denoiser: Denoiser,
                     cfg: ReconstructionConfig,
                     x_true: np.ndarray | None = None) -> tuple[np.ndarray, RunTrace]:
    """K gradient steps, inject sigma_n noise, subtract sigma_n * eps_hat; repeat."""
    cfg.validate()
    if cfg.schedule is None or cfg.schedule.kind != "geometric":
        raise ParameterError("this solver requires a geometric schedule")
    lam = cfg.lam if cfg.lam is not None else auto_tune_lambda(op, y)
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    x = np.zeros(op.image_shape, dtype=np.float64)
    for n, sigma in enumerate(cfg.schedule.sigmas, start=1):
        x = gradient_descent_data(x, y, op, lam, cfg.k_steps)
        trace.grad_evals += cfg.k_steps
        x = x + sigma * rng.standard_normal(x.shape)
        x = x - sigma * denoiser.predict_noise(x, sigma)
        trace.denoiser_evals += 1
        trace.record(n, sigma, data_residual(op, x, y), _mse_or_none(x, x_true))
    return x, trace


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _diffusion_step(x, sigma, alpha, beta, eps_hat, noise):
    # shared by the unconditional and guided samplers so the zeta=0
    # reduction is bit-exact
    return x - (alpha * sigma) * eps_hat + (math.sqrt(alpha * beta) * sigma) * noise


def sample_unconditional(denoiser: Denoiser, schedule: NoiseSchedule,
                         alpha: float, beta: float, shape: tuple[int, int],
                         rng: np.random.Generator) -> np.ndarray:
    """Iterate the generation recursion from x1 = sigma1 * eps1."""
    x = schedule.sigmas[0] * rng.standard_normal(shape)
    for sigma in schedule.sigmas:
        eps_hat = denoiser.predict_noise(x, sigma)
        noise = rng.standard_normal(shape)
        x = _diffusion_step(x, sigma, alpha, beta, eps_hat, noise)
    return x


def dps_step(x: np.ndarray, sigma: float, denoiser: Denoiser, y: np.ndarray,
             op: ProjectionOperator, zeta: float, alpha: float, beta: float,
             rescaled: bool, rng: np.random.Generator,
             trace: RunTrace | None = None) -> np.ndarray:
    """One guided-sampler step: generation update minus a normalized data gradient.

    The gradient of ||A(x - sigma*eps_hat(x)) - y||^2 is transported
    through the denoiser via its vjp hook (exact for the analytic
    denoiser, locally-constant approximation otherwise) and normalized by
    the residual norm; the rescaled variant divides by sqrt(1 + sigma^2)
    as well.  A zero residual skips the guidance term entirely.
    """
    eps_hat = denoiser.predict_noise(x, sigma)
    noise = rng.standard_normal(x.shape)
    out = _diffusion_step(x, sigma, alpha, beta, eps_hat, noise)
    if zeta != 0.0:
        xhat = x - sigma * eps_hat
        r = op.apply(xhat) - y
        rnorm = math.sqrt(float(np.sum(r * r, dtype=np.float64)))
        if rnorm > 0.0:
            grad = 2.0 * denoiser.denoised_vjp(x, sigma, op.adjoint(r))
            denom = rnorm * (math.sqrt(1.0 + sigma * sigma) if rescaled else 1.0)
            out = out - (zeta / denom) * grad
            if trace is not None:
                trace.grad_evals += 1
    return out


def dps_reconstruct(y: np.ndarray, op: ProjectionOperator, denoiser: Denoiser,
                    cfg: ReconstructionConfig,
                    x_true: np.ndarray | None = None) -> tuple[np.ndarray, RunTrace]:
    """Guided sampling over the configured schedule, from x1 = sigma1 * eps1."""
    cfg.validate()
    if cfg.schedule is None:
        raise ParameterError("a schedule is required")
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    x = cfg.schedule.sigmas[0] * rng.standard_normal(op.image_shape)
    for n, sigma in enumerate(cfg.schedule.sigmas, start=1):
        x = dps_step(x, sigma, denoiser, y, op, cfg.zeta, cfg.alpha, cfg.beta,
                     cfg.rescaled, rng, trace)
        trace.denoiser_evals += 1
        trace.record(n, sigma, data_residual(op, x, y), _mse_or_none(x, x_true))
    return x, trace


# ---------------------------------------------------------------------------
# spectral baseline
# ---------------------------------------------------------------------------

def ddrm_reconstruct(y: np.ndarray, op: ProjectionOperator,
                     spectral: SpectralDecomposition, denoiser: Denoiser,
                     cfg: ReconstructionConfig,
                     x_true: np.ndarray | None = None) -> tuple[np.ndarray, RunTrace]:
    """Per-singular-component diffusion restoration.

    The spectral update below follows Eqs. 7-8 of Kawar et al., "Denoising
    Diffusion Restoration Models" (2022), written in the
    variance-exploding parametrization, with two adaptations pinned by
    this artifact: singular values below ``cfg.sv_threshold`` are zeroed,
    and the process starts at the top of ``cfg.schedule`` (default
    30.0) instead of above 1/sigma_min.  Requires the SVD of the
    operator; ``cfg.sigma_y`` is the measurement noise level of y.
    """
    cfg.validate()
    if spectral is None:
        raise CapacityError("spectral decomposition required for this solver")
    if cfg.schedule is None:
        raise ParameterError("a schedule is required")
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    h, w = op.image_shape
    n_pix = h * w

    s_full = np.zeros(n_pix, dtype=np.float64)
    k = spectral.s.shape[0]
    s_full[:k] = spectral.s
    s_full[s_full < cfg.sv_threshold] = 0.0
    measured = s_full > 0.0

    uty = spectral.u.T @ y.ravel()
    uty_img = np.zeros(n_pix, dtype=np.float64)  # m < n: missing rows stay 0
    k_common = min(uty.shape[0], n_pix)
    uty_img[:k_common] = uty[:k_common]
    ybar = np.zeros(n_pix, dtype=np.float64)
    ybar[measured] = uty_img[measured] / s_full[measured]
    noise_per_comp = np.zeros(n_pix, dtype=np.float64)
    if cfg.sigma_y > 0:
        noise_per_comp[measured] = cfg.sigma_y / s_full[measured]

    levels = cfg.schedule.sigmas
    # init at the top level: measured components start on the data
    eps = rng.standard_normal(n_pix)
    var0 = levels[0] ** 2 - noise_per_comp**2
    seeded = measured & (var0 > 0)
    xbar = levels[0] * eps
    xbar[seeded] = ybar[seeded] + np.sqrt(var0[seeded]) * eps[seeded]

    sigma_prev = levels[0]
    targets = list(levels[1:]) + [0.0]
    for n, sigma_t in enumerate(targets, start=1):
        x = (spectral.vt.T @ xbar).reshape(h, w)
        x0 = denoiser.denoised(x, sigma_prev)
        trace.denoiser_evals += 1
        x0bar = spectral.vt @ x0.ravel()
        eps = rng.standard_normal(n_pix)

        new = np.empty(n_pix, dtype=np.float64)
        # unobserved spectral directions: anneal toward the denoised estimate
        free = ~measured
        new[free] = (x0bar[free]
                     + math.sqrt(max(0.0, 1.0 - cfg.eta**2)) * sigma_t
                     * (xbar[free] - x0bar[free]) / sigma_prev
                     + cfg.eta * sigma_t * eps[free])
        # observed directions whose measurement noise still dominates
        noisy = measured & (sigma_t < noise_per_comp)
        if np.any(noisy):
            new[noisy] = (x0bar[noisy]
                          + math.sqrt(max(0.0, 1.0 - cfg.eta**2)) * sigma_t
                          * (ybar[noisy] - x0bar[noisy]) / noise_per_comp[noisy]
                          + cfg.eta * sigma_t * eps[noisy])
        # observed directions: pin to the data
        firm = measured & ~noisy
        var = np.maximum(sigma_t**2 - (cfg.eta_b * noise_per_comp[firm]) ** 2, 0.0)
        new[firm] = ((1.0 - cfg.eta_b) * x0bar[firm] + cfg.eta_b * ybar[firm]
                     + np.sqrt(var) * eps[firm])

        xbar = new
        sigma_prev = sigma_t if sigma_t > 0 else sigma_prev
        x = (spectral.vt.T @ xbar).reshape(h, w)
        trace.record(n, sigma_t, data_residual(op, x, y), _mse_or_none(x, x_true))
    return (spectral.vt.T @ xbar).reshape(h, w), trace


# ---------------------------------------------------------------------------
# dispatch and batch evaluation
# ---------------------------------------------------------------------------

def reconstruct(y: np.ndarray, op: ProjectionOperator, denoiser: Denoiser | None,
                cfg: ReconstructionConfig,
                spectral: SpectralDecomposition | None = None,
                x_true: np.ndarray | None = None) -> tuple[np.ndarray, RunTrace]:
    """Run the method named in the config and return (image, trace)."""
    cfg.validate()
    if cfg.method == "algebraic":
        lam = cfg.lam if cfg.lam is not None else auto_tune_lambda(op, y)
        x = algebraic_reconstruct(y, op, lam, cfg.k_steps)
        trace = RunTrace(grad_evals=cfg.k_steps)
        trace.record(1, 0.0, data_residual(op, x, y), _mse_or_none(x, x_true))
        return x, trace
    if cfg.method == "ddgm":
        return ddgm_reconstruct(y, op, denoiser, cfg, x_true)
    if cfg.method == "dps":
        return dps_reconstruct(y, op, denoiser, cfg, x_true)
    if cfg.method == "ddrm":
        if spectral is None:
            spectral = op.svd()
        return ddrm_reconstruct(y, op, spectral, denoiser, cfg, x_true)
    raise ParameterError(f"unknown method {cfg.method!r}")


def batch_evaluate(cfg: ReconstructionConfig, images: list[np.ndarray],
                   op: ProjectionOperator, denoiser: Denoiser | None,
                   snr: float | None, seed: int,
                   spectral: SpectralDecomposition | None = None,
                   ssim_params=None) -> dict:
    """Per-image MSE/SSIM for one method over a test set, with mean +- se.

    Each image gets child seeds (derived from ``seed``) for its
    measurement noise and its solver run, so the whole table is
    deterministic.  Returns a report row dict plus the per-image values.
    """
    if not images:
        raise ParameterError("test set must be nonempty")
    if cfg.method == "ddrm" and spectral is None:
        spectral = op.svd()
    mses, ssims, resids = [], [], []
    grad_evals = net_evals = 0
    for idx, x_true in enumerate(images):
        noise_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(idx, 0)))
        y, sigma_y = op.simulate_sinogram(x_true, snr, noise_rng)
        run_cfg = ReconstructionConfig(**{**cfg.__dict__, "sigma_y": sigma_y,
                                          "seed": seed + 7919 * idx})
        x, trace = reconstruct(y, op, denoiser, run_cfg, spectral, x_true)
        mses.append(mse(x, x_true))
        ssims.append(ssim(x_true, x, ssim_params))
        resids.append(trace.data_residuals[-1] if trace.data_residuals else 0.0)
        grad_evals, net_evals = trace.grad_evals, trace.denoiser_evals
    return {
        "method": cfg.method,
        "grad_evals": grad_evals,
        "net_evals": net_evals,
        "mse_mean": float(np.mean(mses)),
        "mse_se": standard_error(mses),
        "ssim_mean": float(np.mean(ssims)),
        "ssim_se": standard_error(ssims),
        "residual_mean": float(np.mean(resids)),
        "mse_values": mses,
        "ssim_values": ssims,
    }
