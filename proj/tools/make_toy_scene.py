#!/usr/bin/env python3
"""Writes data/toy.obj: a 4 x 4 x 0.1 floor slab (top face z = 0) and a UV
sphere of radius 0.75 centred at (0, 0, 1). Matches data/toy.sdf; z is up."""

import math
import sys
from pathlib import Path

FLOOR_HALF = 2.0
FLOOR_THICK = 0.1
TOP_GRID = 40
SPHERE_C = (0.0, 0.0, 1.0)
SPHERE_R = 0.75
SEG_U, SEG_V = 96, 48


def main(out: Path) -> None:
    v, vn, faces = [], [], []

    def vert(p, n):
        v.append(p)
        vn.append(n)
        return len(v)

    def quad(a, b, c, d):
        faces.append((a, b, c))
        faces.append((a, c, d))

    # Top face as a grid so per-vertex baselines have something to work with.
    h, g = FLOOR_HALF, TOP_GRID
    idx = [[vert((-h + 2 * h * i / g, -h + 2 * h * j / g, 0.0), (0, 0, 1)) for j in range(g + 1)] for i in range(g + 1)]
    for i in range(g):
        for j in range(g):
            quad(idx[i][j], idx[i + 1][j], idx[i + 1][j + 1], idx[i][j + 1])
    zb = -FLOOR_THICK
    corners = [(-h, -h), (h, -h), (h, h), (-h, h)]
    for k in range(4):
        (x0, y0), (x1, y1) = corners[k], corners[(k + 1) % 4]
        n = (y1 - y0, x0 - x1, 0.0)
        ln = math.hypot(n[0], n[1])
        n = (n[0] / ln, n[1] / ln, 0.0)
        quad(vert((x0, y0, zb), n), vert((x1, y1, zb), n), vert((x1, y1, 0.0), n), vert((x0, y0, 0.0), n))
    bottom = [vert((x, y, zb), (0, 0, -1)) for x, y in corners]
    quad(bottom[3], bottom[2], bottom[1], bottom[0])

    cx, cy, cz = SPHERE_C
    rings = []
    for j in range(SEG_V + 1):
        th = math.pi * j / SEG_V
        ring = []
        for i in range(SEG_U):
            ph = 2 * math.pi * i / SEG_U
            n = (math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th))
            ring.append(vert((cx + SPHERE_R * n[0], cy + SPHERE_R * n[1], cz + SPHERE_R * n[2]), n))
        rings.append(ring)
    for j in range(SEG_V):
        for i in range(SEG_U):
            a, b = rings[j][i], rings[j][(i + 1) % SEG_U]
            c, d = rings[j + 1][(i + 1) % SEG_U], rings[j + 1][i]
            if j == 0:
                faces.append((a, d, c))
            elif j == SEG_V - 1:
                faces.append((a, d, b))
            else:
                quad(a, d, c, b)

    with out.open("w") as f:
        f.write("# toy scene: floor slab and sphere, z up\n")
        for p in v:
            f.write("v %.9g %.9g %.9g\n" % p)
        for n in vn:
            f.write("vn %.9g %.9g %.9g\n" % n)
        for a, b, c in faces:
            f.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "toy.obj")
