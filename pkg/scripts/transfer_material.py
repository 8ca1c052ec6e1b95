#!/usr/bin/env python3
"""Material transfer demo: re-shade one scene with another scene's material.

Builds a two-region sphere (left/right split), renders it with one material
pair, then swaps in the target materials region by region and writes
tone-mapped before/after previews. The same exposure is used for both frames
so the edit is visually comparable.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

import gradshade as gs
from gradshade.core import BACKGROUND_REGION, SegmentationMask
from gradshade.io import write_preview_png
from gradshade.metrics import auto_exposure


def split_sphere(resolution: int):
    nm = gs.sphere_normal_map(resolution)
    ids = np.where(nm.mask, 0, BACKGROUND_REGION).astype(np.int32)
    ids[:, resolution // 2 :][nm.mask[:, resolution // 2 :]] = 1
    return nm, SegmentationMask(ids, 2)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--source", nargs=2, default=["matte", "glossy"],
                    metavar=("LEFT", "RIGHT"), help="source materials by region")
    ap.add_argument("--target", nargs=2, default=["two-tone-a", "two-tone-b"],
                    metavar=("LEFT", "RIGHT"), help="replacement materials by region")
    ap.add_argument("--resolution", type=int, default=96)
    ap.add_argument("--out-dir", type=Path, default=Path("transfer_out"))
    args = ap.parse_args(argv)

    presets = gs.preset_materials()
    for name in args.source + args.target:
        if name not in presets:
            ap.error(f"unknown preset {name!r}; have {sorted(presets)}")

    nm, seg = split_sphere(args.resolution)
    env = gs.default_blob_env(16, 32)
    cam = gs.Camera("orthographic", args.resolution, args.resolution)
    scene = gs.RenderScene(nm, cam, env, tuple(presets[n] for n in args.source), seg)

    before = gs.render(scene)
    after = gs.edit_material(scene, tuple(presets[n] for n in args.target))

    exposure = auto_exposure(before)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_preview_png(args.out_dir / "before.png", gs.tone_map(before, exposure))
    write_preview_png(args.out_dir / "after.png", gs.tone_map(after, exposure))
    print(f"{' + '.join(args.source)}  ->  {' + '.join(args.target)}")
    print(f"wrote {args.out_dir / 'before.png'} and {args.out_dir / 'after.png'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
