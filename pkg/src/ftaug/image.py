"""Raster image primitives shared by every augmentation pipeline.

Conventions used throughout the package:

* an image is a float64 ``numpy`` array of shape ``(H, W, C)`` with
  ``C in {1, 3}``, channels last, values in ``[0, 1]`` at module
  boundaries (intermediate math may leave the range; ``clamp01``
  restores it);
* ``H >= 2`` and ``W >= 2``;
* 8-bit files are scaled by 1/255 on load and written back with
  round-half-up on save.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

__all__ = [
    "WarpField",
    "as_image",
    "channels",
    "clamp01",
    "hsv_to_rgb",
    "lalphabeta_to_rgb",
    "load_image",
    "resize_bilinear",
    "rgb_to_hsv",
    "rgb_to_lalphabeta",
    "save_image",
    "to_gray",
    "warp_bilinear",
]

# Offset added to LMS responses before taking log10, so black pixels stay
# finite.  Mirrors the 8-bit quantisation step.
LOG_EPSILON = 1.0 / 255.0

# RGB -> LMS mixing matrix (Reinhard-style log-LMS decorrelation).  The rows
# are normalised to sum to exactly 1 so that achromatic pixels map onto the
# luminance axis (alpha = beta = 0); the published constants sum to ~0.999.
_RGB_TO_LMS = np.array(
    [
        [0.3811, 0.5783, 0.0402],
        [0.1967, 0.7244, 0.0782],
        [0.0241, 0.1288, 0.8444],
    ]
)
_RGB_TO_LMS /= _RGB_TO_LMS.sum(axis=1, keepdims=True)
_LMS_TO_RGB = np.linalg.inv(_RGB_TO_LMS)

# log-LMS -> l/alpha/beta decorrelation (scaled opponent axes).
_LMS_TO_LAB = np.diag([1 / np.sqrt(3), 1 / np.sqrt(6), 1 / np.sqrt(2)]) @ np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, 1.0, -2.0],
        [1.0, -1.0, 0.0],
    ]
)
_LAB_TO_LMS = np.linalg.inv(_LMS_TO_LAB)


@dataclass
class WarpField:
    """Per-pixel displacement field, in pixels.

    ``dx`` moves samples horizontally (columns), ``dy`` vertically (rows);
    both must match the target image's height and width.
    """

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self) -> None:
        self.dx = np.asarray(self.dx, dtype=np.float64)
        self.dy = np.asarray(self.dy, dtype=np.float64)
        if self.dx.shape != self.dy.shape or self.dx.ndim != 2:
            raise ValueError(
                f"dx/dy must be matching 2-D arrays, got {self.dx.shape} and {self.dy.shape}"
            )
        if not (np.isfinite(self.dx).all() and np.isfinite(self.dy).all()):
            raise ValueError("displacement field contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.dx.shape


def as_image(data: np.ndarray) -> np.ndarray:
    """Coerce ``data`` to the canonical (H, W, C) float64 layout.

    2-D input is treated as a single-channel image.  Raises ``ValueError``
    for unsupported shapes or images smaller than 2x2.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W) or (H, W, 1|3) array, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"image must be at least 2x2, got {arr.shape[:2]}")
    return arr


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def _require_color(img: np.ndarray, op: str) -> np.ndarray:
    img = as_image(img)
    if img.shape[2] != 3:
        raise ValueError(f"{op} requires a 3-channel image, got {img.shape[2]} channel(s)")
    return img


def clamp01(img: np.ndarray) -> np.ndarray:
    """Clip values into [0, 1]; rejects NaN input."""
    arr = np.asarray(img, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("cannot clamp an image containing NaN")
    return np.clip(arr, 0.0, 1.0)


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luminance plane (H, W) via the Rec.601 weights; identity for 1-channel."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114


# ---------------------------------------------------------------------------
# Color spaces
# ---------------------------------------------------------------------------

def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """RGB -> HSV with h in [0, 1) and s, v in [0, 1].

    Achromatic pixels get h = 0 and s = 0.
    """
    img = _require_color(img, "rgb_to_hsv")
    r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    v = img.max(axis=2)
    delta = v - img.min(axis=2)
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        safe = np.where(delta > 0, delta, 1.0)
        h = np.where(
            v == r,
            (g - b) / safe,
            np.where(v == g, 2.0 + (b - r) / safe, 4.0 + (r - g) / safe),
        )
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=2)


def hsv_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`."""
    img = _require_color(img, "hsv_to_rgb")
    h, s, v = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=2)


def rgb_to_lalphabeta(img: np.ndarray) -> np.ndarray:
    """RGB -> log-LMS opponent space (l, alpha, beta).

    Used by the stain-transfer normalisation; gray pixels land on
    alpha = beta = 0.
    """
    img = _require_color(img, "rgb_to_lalphabeta")
    lms = img @ _RGB_TO_LMS.T
    log_lms = np.log10(lms + LOG_EPSILON)
    return log_lms @ _LMS_TO_LAB.T


def lalphabeta_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lalphabeta`; output clamped to [0, 1]."""
    img = _require_color(img, "lalphabeta_to_rgb")
    log_lms = img @ _LAB_TO_LMS.T
    lms = np.power(10.0, log_lms) - LOG_EPSILON
    rgb = np.maximum(lms, 0.0) @ _LMS_TO_RGB.T
    return clamp01(rgb)


# ---------------------------------------------------------------------------
# Sampling / warping
# ---------------------------------------------------------------------------

def bilinear_sample(plane: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    border: str = "replicate") -> np.ndarray:
    """Sample a 2-D plane at fractional (row, col) positions.

    ``border="replicate"`` clamps reads to the nearest edge pixel;
    ``border="zero"`` reads 0 outside the plane.  Exact at integer
    coordinates.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = rows - r0
    fc = cols - c0
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)
    r1 = r0 + 1
    c1 = c0 + 1

    if border == "replicate":
        r0c = np.clip(r0, 0, h - 1)
        r1c = np.clip(r1, 0, h - 1)
        c0c = np.clip(c0, 0, w - 1)
        c1c = np.clip(c1, 0, w - 1)
        v00 = plane[r0c, c0c]
        v01 = plane[r0c, c1c]
        v10 = plane[r1c, c0c]
        v11 = plane[r1c, c1c]
    elif border == "zero":
        def fetch(rr, cc):
            inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            out = np.zeros(rr.shape, dtype=np.float64)
            out[inside] = plane[rr[inside], cc[inside]]
            return out

        v00 = fetch(r0, c0)
        v01 = fetch(r0, c1)
        v10 = fetch(r1, c0)
        v11 = fetch(r1, c1)
    else:
        raise ValueError(f"unknown border mode {border!r}")

    top = v00 * (1.0 - fc) + v01 * fc
    bot = v10 * (1.0 - fc) + v11 * fc
    return top * (1.0 - fr) + bot * fr


def warp_bilinear(img: np.ndarray, field: WarpField, border: str = "replicate") -> np.ndarray:
    """Resample ``img`` at (x + dx, y + dy) with bilinear interpolation.

    A zero field returns the input bit-for-bit.
    """
    img = as_image(img)
    h, w = img.shape[:2]
    if field.shape != (h, w):
        raise ValueError(f"field shape {field.shape} does not match image {(h, w)}")
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    rows = rr + field.dy
    cols = cc + field.dx
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = bilinear_sample(img[:, :, c], rows, cols, border=border)
    return out


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize to (out_h, out_w) by bilinear sampling at pixel centers."""
    img = as_image(img)
    h, w = img.shape[:2]
    rows = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    cols = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = np.empty((out_h, out_w, img.shape[2]), dtype=np.float64)
    for c in range(img.shape[2]):
        out[:, :, c] = bilinear_sample(img[:, :, c], rr, cc, border="replicate")
    return out


# ---------------------------------------------------------------------------
# File IO (8-bit PNG / BMP)
# ---------------------------------------------------------------------------

def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an 8-bit PNG/BMP file; grayscale files become 1-channel images."""
    with PILImage.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            im = im.convert("L")
            arr = np.asarray(im, dtype=np.float64)[:, :, None]
        else:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    return as_image(arr / 255.0)


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write an image to an 8-bit PNG/BMP file (round-half-up quantisation)."""
    img = as_image(img)
    quant = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if quant.shape[2] == 1:
        pil = PILImage.fromarray(quant[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(quant, mode="RGB")
    pil.save(path)
