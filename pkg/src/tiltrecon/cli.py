"""Command-line entry points.

Subcommands: synthesize | simulate | reconstruct | generate | sweep |
blend-demo | report.  All take ``--config FILE`` (JSON, see manifest
module for the key schema) and repeatable ``--set key=value`` overrides;
every command writes a manifest that reproduces its outputs.

Exit codes: 0 success, 2 config error, 3 runtime/numerics error,
4 connectivity error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import manifest as mf
from . import metrics, solvers, storage, synth
from .denoisers import (Denoiser, PassthroughDenoiser, PatchifiedDenoiser,
                        StationaryGaussianDenoiser, gaussian_blur_psd)
from .errors import (ConfigError, ConnectivityError, ParameterError,
                     ProtocolError, TiltReconError)
from .geometry import TiltGeometry
from .projector import ProjectionOperator
from .remote import connect_denoiser
from .schedules import eq2_schedule, geometric_schedule


def _ensure_outdir(cfg) -> str:
    out = cfg["paths"]["output"]
    os.makedirs(out, exist_ok=True)
    return out


def _operator(cfg, shape) -> ProjectionOperator:
    geo = TiltGeometry.from_dict(cfg["geometry"])
    return ProjectionOperator(geo, shape)


def _denoiser(cfg, shape) -> Denoiser:
    block = cfg["denoiser"]
    if block["kind"] == "passthrough":
        return PassthroughDenoiser()
    if block["kind"] == "analytic":
        psd = gaussian_blur_psd(shape, block["corr_length"], block["variance"])
        return StationaryGaussianDenoiser(np.zeros(shape), psd)
    return connect_denoiser(block["endpoint"])


def _schedule(cfg, context: str):
    sigma1 = mf.resolve_sigma1(cfg, context)
    steps = mf.resolve_steps(cfg, context)
    if context == "generate" or (context == "dps" and cfg["schedule"] == "eq2"):
        return eq2_schedule(sigma1, cfg["alpha"], cfg["beta"], steps)
    return geometric_schedule(sigma1, cfg["sigma_n"], steps)


def _solver_config(cfg, method: str) -> solvers.ReconstructionConfig:
    return solvers.ReconstructionConfig(
        method=method,
        schedule=None if method == "algebraic" else _schedule(cfg, method),
        lam=cfg["lambda"],
        k_steps=int(cfg["k"]),
        seed=int(cfg["seed"]),
        zeta=float(cfg["zeta"]),
        alpha=float(cfg["alpha"]),
        beta=float(cfg["beta"]),
        rescaled=bool(cfg["rescaled"]),
        eta=float(cfg["eta"]),
        eta_b=float(cfg["eta_b"]),
        sv_threshold=float(cfg["sv_threshold"]),
        sigma_y=float(cfg["sigma_y"]),
    )


def _ssim_params(cfg) -> metrics.SsimParams:
    block = cfg["metrics"]
    return metrics.SsimParams(window_size=int(block["window_size"]),
                              window_sigma=float(block["window_sigma"]),
                              k1=float(block["k1"]), k2=float(block["k2"]))


def _child_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(index,)))


def _list_images(path: str) -> list[str]:
    if os.path.isfile(path) or os.path.isfile(path + storage.RAW_SUFFIX):
        return [path]
    names = sorted(f for f in os.listdir(path) if f.endswith(storage.RAW_SUFFIX))
    return [os.path.join(path, f) for f in names]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synthesize(cfg) -> int:
    out = _ensure_outdir(cfg)
    shape = mf.resolve_size(cfg)
    files = []
    for i in range(int(cfg["count"])):
        rng = _child_rng(int(cfg["seed"]), i)
        kwargs = {}
        if cfg["generator"] == "gaussian":
            kwargs = {"corr_length": cfg["corr_length"], "variance": cfg["variance"]}
        img = synth.generate(cfg["generator"], shape, rng, **kwargs)
        base = os.path.join(out, f"img_{i:04d}")
        storage.save_array(base, img, role="image")
        if cfg["png"]:
            storage.export_png(base + ".png", img)
        files.append(os.path.basename(base))
    mf.write_manifest(out, cfg, {"command": "synthesize", "files": files})
    return 0


def cmd_simulate(cfg) -> int:
    out = _ensure_outdir(cfg)
    inputs = _list_images(mf.require_input(cfg, "simulate"))
    geo = TiltGeometry.from_dict(cfg["geometry"])
    records = []
    for i, path in enumerate(inputs):
        img, _ = storage.load_array(path)
        op = ProjectionOperator(geo, img.shape)
        rng = _child_rng(int(cfg["seed"]), i)
        snr = cfg["snr"]
        sino, sigma_y = op.simulate_sinogram(
            img.astype(np.float64), None if snr is None else float(snr), rng)
        stem = os.path.splitext(os.path.basename(path))[0]
        base = os.path.join(out, f"sino_{stem}")
        storage.save_array(base, sino, role="sinogram", geometry=geo)
        if cfg["png"]:
            storage.export_png(base + ".png", sino)
        records.append({"input": path, "file": os.path.basename(base),
                        "sigma_y": sigma_y})
    mf.write_manifest(out, cfg, {"command": "simulate", "sinograms": records})
    return 0


def cmd_reconstruct(cfg) -> int:
    out = _ensure_outdir(cfg)
    sino_path = mf.require_input(cfg, "reconstruct")
    sino, header = storage.load_array(sino_path)
    geo = storage.geometry_from_header(header)
    if geo is None:
        geo = TiltGeometry.from_dict(cfg["geometry"])
    shape = mf.resolve_size(cfg)
    op = ProjectionOperator(geo, shape)
    method = cfg["method"]
    run_cfg = _solver_config(cfg, method)
    y = sino.astype(np.float64)
    if run_cfg.lam is None and method in ("algebraic", "ddgm"):
        run_cfg.lam = solvers.auto_tune_lambda(op, y)
    den = None if method == "algebraic" else _denoiser(cfg, shape)
    x_true = None
    if cfg["paths"]["truth"]:
        x_true, _ = storage.load_array(cfg["paths"]["truth"])
        x_true = x_true.astype(np.float64)
    x, trace = solvers.reconstruct(y, op, den, run_cfg, x_true=x_true)
    base = os.path.join(out, "recon")
    storage.save_array(base, x, role="image")
    if cfg["png"]:
        storage.export_png(base + ".png", x)
    trace.write_csv(os.path.join(out, "trace.csv"))
    derived = {
        "command": "reconstruct",
        "input": sino_path,
        "lambda_used": run_cfg.lam,
        "schedule_sigmas": [] if run_cfg.schedule is None
                           else [float(s) for s in run_cfg.schedule.sigmas],
        "grad_evals": trace.grad_evals,
        "denoiser_evals": trace.denoiser_evals,
        "files": ["recon"],
    }
    if x_true is not None:
        derived["mse"] = metrics.mse(x, x_true)
        derived["ssim"] = metrics.ssim(x_true, x, _ssim_params(cfg))
    mf.write_manifest(out, cfg, derived)
    return 0


def cmd_generate(cfg) -> int:
    out = _ensure_outdir(cfg)
    shape = mf.resolve_size(cfg)
    schedule = _schedule(cfg, "generate")
    den = _denoiser(cfg, shape)
    files = []
    for i in range(int(cfg["count"])):
        rng = _child_rng(int(cfg["seed"]), i)
        img = solvers.sample_unconditional(den, schedule, float(cfg["alpha"]),
                                           float(cfg["beta"]), shape, rng)
        base = os.path.join(out, f"gen_{i:04d}")
        storage.save_array(base, img, role="image")
        if cfg["png"]:
            storage.export_png(base + ".png", img)
        files.append(os.path.basename(base))
    mf.write_manifest(out, cfg, {
        "command": "generate", "files": files,
        "schedule_sigmas": [float(s) for s in schedule.sigmas]})
    return 0


def _sweep_cells(cfg) -> list[dict]:
    grid = cfg["sweep"] or {}
    keys = sorted(grid)
    cells = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cell = json.loads(json.dumps(cfg))  # deep copy
        cell["sweep"] = None
        for k, v in zip(keys, combo):
            cell[k] = v
        cells.append(cell)
    return cells


def _run_cell(args) -> dict:
    cell, image_paths, swept_keys = args
    images = [storage.load_array(p)[0].astype(np.float64) for p in image_paths]
    shape = images[0].shape
    op = _operator(cell, shape)
    method = cell["method"]
    den = None if method == "algebraic" else _denoiser(cell, shape)
    run_cfg = _solver_config(cell, method)
    snr = cell["snr"]
    row = solvers.batch_evaluate(run_cfg, images, op, den,
                                 None if snr is None else float(snr),
                                 int(cell["seed"]),
                                 ssim_params=_ssim_params(cell))
    row.pop("mse_values"), row.pop("ssim_values")
    return {**{k: cell[k] for k in swept_keys}, **row}


def cmd_sweep(cfg, workers: int = 1) -> int:
    out = _ensure_outdir(cfg)
    if cfg["sweep"] is None:
        raise ConfigError("key 'sweep': a parameter grid is required")
    cells_dir = os.path.join(out, "cells")
    os.makedirs(cells_dir, exist_ok=True)
    image_paths = _list_images(mf.require_input(cfg, "sweep"))
    if not image_paths:
        raise ConfigError("key 'paths.input': no images found")
    swept_keys = sorted(cfg["sweep"])
    cells = _sweep_cells(cfg)

    def cell_key(cell):
        # identity excludes the output location so a sweep can be moved
        # or re-rooted without invalidating completed cells
        scrubbed = json.loads(json.dumps(cell))
        scrubbed["paths"]["output"] = None
        return mf.config_hash(scrubbed)

    ordered_ids = [cell_key(cell) for cell in cells]
    pending = [(cell, image_paths, swept_keys, cell_id)
               for cell, cell_id in zip(cells, ordered_ids)
               if not os.path.exists(os.path.join(cells_dir, cell_id + ".json"))]

    def finish(cell_id, row):
        storage.atomic_write(os.path.join(cells_dir, cell_id + ".json"),
                             (json.dumps(row, sort_keys=True) + "\n").encode())

    if workers > 1 and len(pending) > 1:
        # spawn, not fork: the jitted kernels' thread pools do not survive
        # forking once they have run in the parent
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = pool.map(_run_cell, [(c, p, s) for c, p, s, _ in pending])
            for (_, _, _, cell_id), row in zip(pending, results):
                finish(cell_id, row)
    else:
        for cell, paths, keys, cell_id in pending:
            finish(cell_id, _run_cell((cell, paths, keys)))

    rows = []
    for cell_id in ordered_ids:
        with open(os.path.join(cells_dir, cell_id + ".json")) as f:
            rows.append({"cell": cell_id, **json.load(f)})
    fields = ["cell"] + swept_keys + metrics.REPORT_COLUMNS + ["residual_mean"]
    lines = [",".join(fields)]
    for row in rows:
        lines.append(",".join(json.dumps(row.get(k, "")) for k in fields))
    storage.atomic_write(os.path.join(out, "sweep.csv"),
                         ("\n".join(lines) + "\n").encode())
    mf.write_manifest(out, cfg, {"command": "sweep", "cells": ordered_ids})
    return 0


def seam_statistics(x: np.ndarray, patch: int, stride: int) -> dict:
    """Max absolute column-difference at patch boundaries vs interior."""
    w = x.shape[1]
    col_diff = np.max(np.abs(np.diff(x, axis=1)), axis=0)  # one value per junction
    starts = [c for c in range(stride, w - patch + 1, stride)]
    if not starts or starts[-1] != w - patch:
        starts.append(w - patch)
    boundary = set()
    for c in starts:
        for j in (c - 1, c + patch - 1):
            if 0 <= j < w - 1:
                boundary.add(j)
    interior = [d for j, d in enumerate(col_diff) if j not in boundary]
    bvals = [col_diff[j] for j in sorted(boundary)]
    mu, sd = float(np.mean(interior)), float(np.std(interior))
    z = (float(np.mean(bvals)) - mu) / sd if sd > 0 else 0.0
    return {"boundary_mean": float(np.mean(bvals)), "interior_mean": mu,
            "interior_std": sd, "zscore": z}


def cmd_blend_demo(cfg) -> int:
    out = _ensure_outdir(cfg)
    shape = mf.resolve_size(cfg, default=(64, 512))
    patch, stride = int(cfg["patch"]), int(cfg["stride"])
    rng = _child_rng(int(cfg["seed"]), 0)
    wide_prior = synth.gaussian_texture_denoiser(shape, cfg["corr_length"],
                                                 cfg["variance"])
    x_true = wide_prior.sample_prior(rng)
    op = _operator(cfg, shape)
    snr = cfg["snr"]
    y, sigma_y = op.simulate_sinogram(x_true, None if snr is None else float(snr),
                                      rng)
    inner = StationaryGaussianDenoiser(
        np.zeros((patch, patch)),
        gaussian_blur_psd((patch, patch), cfg["corr_length"], cfg["variance"]))
    den = PatchifiedDenoiser(inner, patch_size=patch, stride=stride,
                             profile=cfg["bump_profile"])
    run_cfg = _solver_config(cfg, "ddgm")
    x, trace = solvers.ddgm_reconstruct(y, op, den, run_cfg, x_true=x_true)
    base = os.path.join(out, "blend_recon")
    storage.save_array(base, x, role="image")
    if cfg["png"]:
        storage.export_png(base + ".png", x)
    trace.write_csv(os.path.join(out, "trace.csv"))
    seams = seam_statistics(x, patch, stride)
    mf.write_manifest(out, cfg, {
        "command": "blend-demo", "sigma_y": sigma_y, "seam": seams,
        "mse": metrics.mse(x, x_true),
        "grad_evals": trace.grad_evals, "denoiser_evals": trace.denoiser_evals})
    if seams["zscore"] > 2.0:
        print(f"seam check failed: boundary z-score {seams['zscore']:.2f} > 2",
              file=sys.stderr)
        return 3
    return 0


def cmd_report(cfg) -> int:
    path = mf.require_input(cfg, "report")
    rows = []
    cells_dir = os.path.join(path, "cells") if os.path.isdir(path) else None
    if cells_dir and os.path.isdir(cells_dir):
        for name in sorted(os.listdir(cells_dir)):
            if name.endswith(".json"):
                with open(os.path.join(cells_dir, name)) as f:
                    rows.append(json.load(f))
    elif path.endswith(".json"):
        with open(path) as f:
            rows.append(json.load(f))
    else:
        raise ConfigError(f"key 'paths.input': expected a sweep directory or a "
                          f"cell json, got {path}")
    sys.stdout.write(metrics.report_table(rows))
    out = cfg["paths"]["output"]
    if out and out != "out":
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.csv"), "w") as f:
            f.write(metrics.report_csv(rows))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

COMMANDS = {
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "generate": cmd_generate,
    "sweep": cmd_sweep,
    "blend-demo": cmd_blend_demo,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltrecon",
        description="Limited-angle tomography with diffusion-style denoising priors")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable; dot notation "
                            "for blocks, e.g. geometry.num_angles=16)")
        p.add_argument("--input", default=None, help="shorthand for paths.input")
        p.add_argument("--output", default=None, help="shorthand for paths.output")
        p.add_argument("--seed", type=int, default=None)
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.input is not None:
        overrides.append(f"paths.input={args.input}")
    if args.output is not None:
        overrides.append(f"paths.output={args.output}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg = mf.load_config(args.config, overrides)
        if args.command == "sweep":
            return cmd_sweep(cfg, workers=args.workers)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConnectivityError, ProtocolError) as exc:
        print(f"connectivity error: {exc}", file=sys.stderr)
        return 4
    except TiltReconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
