#!/usr/bin/env python3
"""Forward-render benchmark across image sizes and worker counts.

Also re-checks the determinism contract: every worker count must produce
bit-identical pixels.
"""

import argparse
import sys
import time

import numpy as np

import gradshade as gs


def bench(resolution, env_h, threads, repeats):
    scene = gs.RenderScene(
        gs.sphere_normal_map(resolution),
        gs.Camera("orthographic", resolution, resolution),
        gs.default_blob_env(env_h, 2 * env_h),
        (gs.preset_materials()["glossy"],),
    )
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = gs.render(scene, threads=threads).pixels
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--env-height", type=int, default=64)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--repeats", type=int, default=2)
    args = ap.parse_args(argv)

    print(f"{'res':>5} {'env':>9} " + " ".join(f"t={t:<2d}" for t in args.threads) + "   identical")
    for res in args.resolutions:
        times = []
        pixels = []
        for t in args.threads:
            dt, out = bench(res, args.env_height, t, args.repeats)
            times.append(dt)
            pixels.append(out)
        same = all(np.array_equal(p, pixels[0]) for p in pixels[1:])
        cells = " ".join(f"{dt:5.2f}s" for dt in times)
        print(f"{res:>5} {args.env_height}x{2 * args.env_height:<5} {cells}   {same}")
        if not same:
            print("determinism violated", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
