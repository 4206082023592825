"""Full-reference quality metrics: PSNR and SSIM on 8-bit images."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ImageTooSmall

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 255.0
PSNR_CAP = 99.0


def _pixels(img):
    data = np.asarray(getattr(img, "data", img))
    if data.ndim == 2:
        data = data[:, :, None]
    if data.ndim != 3:
        raise DimensionMismatch(f"expected an HxWxC image, got shape {data.shape}")
    return data.astype(np.float64)


def _paired(a, b):
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"image shapes differ: {pa.shape} vs {pb.shape}")
    return pa, pb


def psnr(a, b):
    """Peak signal-to-noise ratio in dB over all channels; 99 dB cap
    for identical images."""
    pa, pb = _paired(a, b)
    mse = np.mean((pa - pb) ** 2)
    if mse == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(PEAK * PEAK / mse))


def _gaussian_kernel(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img, kernel):
    # separable Gaussian, valid windows only
    size = kernel.size
    rows = np.lib.stride_tricks.sliding_window_view(img, size, axis=0) @ kernel
    return np.lib.stride_tricks.sliding_window_view(rows, size, axis=1) @ kernel


def _ssim_channel(x, y, kernel, c1, c2):
    mu_x = _filter_valid(x, kernel)
    mu_y = _filter_valid(y, kernel)
    var_x = _filter_valid(x * x, kernel) - mu_x * mu_x
    var_y = _filter_valid(y * y, kernel) - mu_y * mu_y
    cov = _filter_valid(x * y, kernel) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return np.mean(num / den)


def ssim(a, b):
    """Mean structural similarity over 11x11 Gaussian windows
    (sigma = 1.5), computed per channel and averaged."""
    pa, pb = _paired(a, b)
    h, w = pa.shape[:2]
    if min(h, w) < SSIM_WINDOW:
        raise ImageTooSmall(
            f"SSIM needs both sides >= {SSIM_WINDOW}, got {h}x{w}")
    kernel = _gaussian_kernel()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    scores = [_ssim_channel(pa[:, :, c], pb[:, :, c], kernel, c1, c2)
              for c in range(pa.shape[2])]
    return float(np.mean(scores))


@dataclass
class MetricReport:
    """Per-image PSNR/SSIM plus their arithmetic means."""

    names: list = field(default_factory=list)
    psnr_values: list = field(default_factory=list)
    ssim_values: list = field(default_factory=list)

    def add(self, name, psnr_db, ssim_score):
        self.names.append(name)
        self.psnr_values.append(psnr_db)
        self.ssim_values.append(ssim_score)

    @property
    def mean_psnr(self):
        return float(np.mean(self.psnr_values)) if self.psnr_values else float("nan")

    @property
    def mean_ssim(self):
        return float(np.mean(self.ssim_values)) if self.ssim_values else float("nan")

    def to_dict(self):
        return {
            "images": [
                {"name": n, "psnr": p, "ssim": s}
                for n, p, s in zip(self.names, self.psnr_values, self.ssim_values)
            ],
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
        }
