"""8-bit image loading/saving and conversion to the [0,1] tensor space.

Supported containers: PNG (via Pillow) and binary PPM (P6, maxval 255).
Everything downstream works on RGB; grayscale inputs are replicated to
three channels and alpha channels are stripped.
"""

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptData, ShapeMismatch, UnsupportedFormat


@dataclass
class RawImage:
    """An 8-bit RGB image. ``data`` is (height, width, 3) uint8, row-major."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ShapeMismatch(f"expected (H, W, 3) data, got {self.data.shape}")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


def _read_ppm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P6"):
        raise UnsupportedFormat(f"{path}: not a binary PPM (P6) file")

    # Header is ASCII tokens (magic, width, height, maxval) with '#' comments,
    # followed by a single whitespace byte before the raster.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptData(f"{path}: truncated PPM header")
        fields.append(blob[start:pos])
    pos += 1  # the single whitespace after maxval

    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise CorruptData(f"{path}: malformed PPM header fields {fields!r}")
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: only maxval 255 PPM is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise CorruptData(f"{path}: invalid PPM dimensions {width}x{height}")

    need = width * height * 3
    raster = blob[pos : pos + need]
    if len(raster) < need:
        raise CorruptData(f"{path}: PPM raster has {len(raster)} bytes, expected {need}")
    data = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return RawImage(data.copy())


def _write_ppm(path, img):
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.data.tobytes())


def load_image(path):
    """Load a PNG or binary PPM file as an 8-bit RGB :class:`RawImage`."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P6":
        return _read_ppm(path)
    if head.startswith(b"P"):
        raise UnsupportedFormat(f"{path}: only the P6 PPM variant is supported")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("RGBA", "LA", "PA"):
                # Alpha is dropped, not composited.
                arr = np.asarray(im.convert("RGBA"))[..., :3]
            elif im.mode == "RGB":
                arr = np.asarray(im)
            elif im.mode in ("L", "P", "1"):
                arr = np.asarray(im.convert("RGB"))
            else:
                raise UnsupportedFormat(f"{path}: unsupported mode {im.mode!r}")
    except UnidentifiedImageError:
        raise UnsupportedFormat(f"{path}: not a PNG or PPM file")
    except (OSError, SyntaxError) as exc:
        raise CorruptData(f"{path}: {exc}")
    if arr.dtype != np.uint8:
        raise UnsupportedFormat(f"{path}: only 8-bit images are supported")
    return RawImage(arr)


def save_image(path, img):
    """Write an 8-bit RGB image; format chosen by extension (.png or .ppm)."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".ppm":
        _write_ppm(path, img)
    elif ext == ".png":
        Image.fromarray(img.data, mode="RGB").save(path, format="PNG")
    else:
        raise UnsupportedFormat(f"{path}: use a .png or .ppm extension")


def to_unit_tensor(img, dtype=np.float32):
    """Map intensities to [0,1]: returns a (1, 3, H, W) array of ``dtype``."""
    arr = img.data.astype(dtype) / dtype(255.0)
    return np.ascontiguousarray(arr.transpose(2, 0, 1)[None])


def from_unit_tensor(t):
    """Map a (1, 3, H, W) float tensor back to 8-bit, round-half-up with clamp."""
    t = np.asarray(t)
    if t.ndim != 4 or t.shape[0] != 1 or t.shape[1] != 3:
        raise ShapeMismatch(f"expected shape (1, 3, H, W), got {t.shape}")
    scaled = np.clip(t[0], 0.0, 1.0).astype(np.float64) * 255.0
    quantized = np.floor(scaled + 0.5).astype(np.uint8)
    return RawImage(quantized.transpose(1, 2, 0))
