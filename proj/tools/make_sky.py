#!/usr/bin/env python3
"""Writes data/sky.pfm: a 128 x 64 equirectangular sky (+z up) with a blue
gradient, a warm sun lobe and a dim ground, as little-endian PFM."""

import sys
from pathlib import Path

import numpy as np

W, H = 128, 64
SUN = np.array([0.55, -0.35, 0.76])


def main(out: Path) -> None:
    v, u = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    th, ph = np.pi * v / H, 2 * np.pi * u / W
    d = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    z = d[..., 2:3]
    up = np.clip(z, 0, 1)
    sky = (1 - up) * np.array([0.9, 0.95, 1.0]) + up * np.array([0.35, 0.55, 0.95])
    ground = np.array([0.25, 0.22, 0.2]) * np.ones_like(sky)
    w = np.clip(z * 8 + 0.5, 0, 1)
    rgb = w * sky + (1 - w) * ground
    cos_sun = d @ (SUN / np.linalg.norm(SUN))
    rgb += np.clip(cos_sun, 0, 1)[..., None] ** 16 * np.array([3.0, 2.6, 2.0])
    rows = rgb[::-1].astype("<f4")  # PFM stores the bottom row first
    with out.open("wb") as f:
        f.write(b"PF\n%d %d\n-1.0\n" % (W, H))
        f.write(rows.tobytes())


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "sky.pfm")
