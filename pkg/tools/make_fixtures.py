"""Regenerate the bundled data files in src/tpreg/data.

    python3 tools/make_fixtures.py

* baart100.t3d: the baart test matrix of order 100 (first-kind Fredholm
  equation with kernel exp(s cos t) on [0, pi/2] x [0, pi]), discretized by
  the Galerkin scheme of the Regularization Tools package: Simpson's rule in
  t and exact integration in s over piecewise-constant basis functions.
* phantom64.pgm: 64 x 64 synthetic gray phantom (ellipses and a bar).
* phantom64.ppm: 64 x 64 color phantom with correlated channels (the gray
  phantom, a copy shifted by one pixel and dimmed, and a dimmed copy).
* video/frame_0000.pgm ... frame_0005.pgm: six 64 x 64 frames of a phantom
  whose features drift by one pixel per frame.

Everything is deterministic; no random numbers are used.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from tpreg import netpbm, t3d  # noqa: E402

DATA = ROOT / "src" / "tpreg" / "data"


def baart(n):
    hs = np.pi / (2 * n)
    ht = np.pi / n
    c = 1.0 / (3.0 * np.sqrt(2.0))
    ihs = np.arange(n + 1) * hs
    a = np.zeros((n, n))
    f3 = np.exp(ihs[1:]) - np.exp(ihs[:-1])
    for j in range(1, n + 1):
        f1 = f3
        co2 = np.cos((j - 0.5) * ht)
        co3 = np.cos(j * ht)
        f2 = (np.exp(ihs[1:] * co2) - np.exp(ihs[:-1] * co2)) / co2
        if j == n // 2:
            f3 = hs * np.ones(n)
        else:
            f3 = (np.exp(ihs[1:] * co3) - np.exp(ihs[:-1] * co3)) / co3
        a[:, j - 1] = c * (f1 + 4 * f2 + f3)
    return a


def phantom(n, shift=0):
    y, x = np.mgrid[0:n, 0:n] / (n - 1) * 2 - 1
    x = x - 2 * shift / (n - 1)
    img = np.zeros((n, n))
    for cx, cy, rx, ry, v in [
        (0.0, 0.0, 0.75, 0.9, 0.45),
        (-0.25, -0.2, 0.25, 0.35, 0.35),
        (0.3, 0.25, 0.18, 0.15, 0.5),
    ]:
        img[((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 <= 1] += v
    img[(np.abs(y + 0.6) < 0.06) & (np.abs(x) < 0.5)] = 0.9
    return np.clip(img, 0, 1)


def to_pixels(img):
    return np.rint(np.clip(img, 0, 1) * 255).astype(np.int64)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    t3d.save(DATA / "baart100.t3d", baart(100)[:, :, None])
    base = phantom(64)
    netpbm.write(DATA / "phantom64.pgm", to_pixels(base))
    # correlated channels, as in natural photographs: one slightly shifted, one dimmer
    color = np.stack([base, phantom(64, shift=1) * 0.85, base * 0.7], axis=2)
    netpbm.write(DATA / "phantom64.ppm", to_pixels(color))
    vdir = DATA / "video"
    vdir.mkdir(exist_ok=True)
    for f in range(6):
        netpbm.write(vdir / f"frame_{f:04d}.pgm", to_pixels(phantom(64, shift=f)))


if __name__ == "__main__":
    main()
