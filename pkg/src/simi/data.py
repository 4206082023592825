"""Locator for the bundled sample images (four synthetic dark scenes).

The files live inside the package so the smoke-training path works
offline; tools/gen_dark_images.py regenerates them deterministically.
"""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent / "data"


def bundled_data_dir():
    return DATA_DIR


def bundled_image_paths():
    return sorted(DATA_DIR.glob("*.png"))
