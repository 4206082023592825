"""Regenerate the bundled low-light test images.

Four 128x128 synthetic dark scenes with different structure (smooth
gradients, noise texture, blocky regions, mixed shapes) so random crops
during smoke training see varied content. Deterministic: running this
script always reproduces identical files.

Usage: python3 tools/gen_dark_images.py
"""

from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 128
OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "simi" / "data"


def _grid():
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    return yy / (SIZE - 1), xx / (SIZE - 1)


def scene_gradient(rng):
    yy, xx = _grid()
    img = np.zeros((SIZE, SIZE, 3))
    img[:, :, 0] = 10 + 35 * xx
    img[:, :, 1] = 8 + 30 * yy
    img[:, :, 2] = 12 + 25 * (1 - xx) * yy
    for _ in range(3):
        cy, cx = rng.uniform(0.2, 0.8, 2)
        rad = rng.uniform(0.08, 0.2)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 < rad**2
        img[mask] += rng.uniform(15, 30, 3)
    return img


def scene_noise(rng):
    base = rng.uniform(8, 18, 3)
    img = np.broadcast_to(base, (SIZE, SIZE, 3)).copy()
    img += rng.normal(0, 4, (SIZE, SIZE, 3))
    yy, xx = _grid()
    img += 20 * np.sin(6.0 * np.pi * xx)[:, :, None] * yy[:, :, None]
    return img


def scene_blocks(rng):
    img = np.zeros((SIZE, SIZE, 3))
    cell = 16
    for by in range(SIZE // cell):
        for bx in range(SIZE // cell):
            img[by * cell : (by + 1) * cell, bx * cell : (bx + 1) * cell] = rng.uniform(3, 55, 3)
    return img


def scene_mixed(rng):
    yy, xx = _grid()
    img = np.zeros((SIZE, SIZE, 3))
    img[:, :, 2] = 18 + 30 * (1 - yy)  # dim blue-ish sky falling off downward
    img[:, :, 1] = 10 + 12 * (1 - yy)
    img[:, :, 0] = 6 + 8 * (1 - yy)
    horizon = yy > 0.6
    img[horizon] = rng.uniform(2, 10, 3)
    for _ in range(4):
        x0 = rng.integers(5, SIZE - 30)
        wdt = rng.integers(8, 22)
        hgt = rng.integers(20, 60)
        img[SIZE - hgt :, x0 : x0 + wdt] = rng.uniform(1, 6, 3)
    window_rows = rng.integers(SIZE - 50, SIZE - 5, 12)
    window_cols = rng.integers(5, SIZE - 5, 12)
    for r, c in zip(window_rows, window_cols):
        img[r : r + 2, c : c + 2] = (70, 60, 30)
    return img


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240817)
    scenes = {
        "dark_gradient.png": scene_gradient,
        "dark_noise.png": scene_noise,
        "dark_blocks.png": scene_blocks,
        "dark_mixed.png": scene_mixed,
    }
    for name, fn in scenes.items():
        img = np.clip(fn(rng), 0, 255).astype(np.uint8)
        Image.fromarray(img, mode="RGB").save(OUT_DIR / name)
        print(f"{name}: mean={img.mean():.1f} max={img.max()}")


if __name__ == "__main__":
    main()
