"""Windowed structural similarity."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError

# Standard constants: 11-tap Gaussian window, sigma 1.5, K1/K2 = 0.01/0.03.
WINDOW = 11
SIGMA = 1.5
K1 = 0.01
K2 = 0.03
_TRUNCATE = (WINDOW - 1) / 2 / SIGMA  # radius 5 taps


def to_gray(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        return arr @ np.array([0.2125, 0.7154, 0.0721])
    return arr


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM over Gaussian windows; color inputs are converted to gray.

    Border pixels without a full window are cropped before averaging.
    """
    x, y = to_gray(a), to_gray(b)
    if x.shape != y.shape:
        raise InvalidInputError(f"images differ in shape: {x.shape} vs {y.shape}")
    if min(x.shape) < WINDOW:
        raise InvalidInputError(f"images smaller than the {WINDOW}-pixel window")

    def blur(z):
        return ndimage.gaussian_filter(z, SIGMA, truncate=_TRUNCATE)

    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_x, mu_y = blur(x), blur(y)
    # sample (unbiased-style) moments via filtered products
    xx, yy, xy = blur(x * x), blur(y * y), blur(x * y)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    ssim_map = num / den
    pad = (WINDOW - 1) // 2
    return float(ssim_map[pad:-pad, pad:-pad].mean())
