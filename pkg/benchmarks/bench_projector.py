#!/usr/bin/env python3
"""Benchmark the projector hot loops: numba kernels vs the numpy fallback.

Times forward and adjoint applications at several problem sizes and
prints a table (or JSON with --json).  Both code paths are imported
directly, so this script runs regardless of the TILTRECON_BACKEND
environment flag.
"""

import argparse
import json
import time

import numpy as np

from tiltrecon._kernels import (_adjoint_numba, _adjoint_numpy, _forward_numba,
                                _forward_numpy)
from tiltrecon.backend import NUMBA_AVAILABLE
from tiltrecon.geometry import TiltGeometry

SIZES = [(32, 32), (64, 64), (128, 128)]
REPEATS = 20


def time_call(fn, *args, repeats=REPEATS):
    fn(*args)  # warmup (and JIT for the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--json", action="store_true", help="emit JSON")
    parser.add_argument("--repeats", type=int, default=REPEATS)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = []
    for h, w in SIZES:
        geo = TiltGeometry(num_angles=h)
        cos_a = np.cos(geo.angles_rad)
        sin_a = np.sin(geo.angles_rad)
        img = rng.standard_normal((h, w))
        sino = rng.standard_normal((h, w))
        row = {"size": f"{h}x{w}", "angles": h}
        row["forward_numpy_s"] = time_call(_forward_numpy, img, cos_a, sin_a, w,
                                           repeats=args.repeats)
        row["adjoint_numpy_s"] = time_call(_adjoint_numpy, sino, cos_a, sin_a, h, w,
                                           repeats=args.repeats)
        if NUMBA_AVAILABLE:
            row["forward_numba_s"] = time_call(_forward_numba, img, cos_a, sin_a, w,
                                               repeats=args.repeats)
            row["adjoint_numba_s"] = time_call(_adjoint_numba, sino, cos_a, sin_a,
                                               h, w, repeats=args.repeats)
            row["forward_speedup"] = row["forward_numpy_s"] / row["forward_numba_s"]
            row["adjoint_speedup"] = row["adjoint_numpy_s"] / row["adjoint_numba_s"]
            fwd_np = _forward_numpy(img, cos_a, sin_a, w)
            fwd_nb = _forward_numba(img, cos_a, sin_a, w)
            row["max_rel_diff"] = float(np.abs(fwd_np - fwd_nb).max()
                                        / np.abs(fwd_np).max())
        rows.append(row)

    if args.json:
        print(json.dumps({"numba_available": NUMBA_AVAILABLE, "rows": rows},
                         indent=2))
        return
    for row in rows:
        print(f"{row['size']:>9} ({row['angles']} views): "
              f"numpy fwd {row['forward_numpy_s'] * 1e3:8.2f} ms, "
              f"adj {row['adjoint_numpy_s'] * 1e3:8.2f} ms", end="")
        if NUMBA_AVAILABLE:
            print(f" | numba fwd {row['forward_numba_s'] * 1e3:7.2f} ms "
                  f"({row['forward_speedup']:5.1f}x), "
                  f"adj {row['adjoint_numba_s'] * 1e3:7.2f} ms "
                  f"({row['adjoint_speedup']:5.1f}x), "
                  f"rel diff {row['max_rel_diff']:.1e}")
        else:
            print(" | numba unavailable")


if __name__ == "__main__":
    main()
