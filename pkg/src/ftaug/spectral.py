"""Numerical transform core: DCT, FFT, Haar wavelets, Radon, PCA, kernels.

All operations work on single 2-D planes (one image channel at a time).
DCT and FFT use orthonormal scaling so Parseval holds exactly up to
floating point; the Haar pair and the transform inverses reconstruct
their inputs to tight tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy import ndimage

from .image import bilinear_sample

__all__ = [
    "PcaBasis",
    "Sinogram",
    "SpectralPlane",
    "WaveletPlanes",
    "conv2_same",
    "dct2",
    "fft2",
    "haar_dwt2",
    "haar_idwt2",
    "idct2",
    "ifft2",
    "iradon",
    "make_kernel",
    "pca_fit",
    "pca_project",
    "pca_reconstruct",
    "radon",
]

_SQRT2 = np.sqrt(2.0)


@dataclass
class SpectralPlane:
    """Transform coefficients of one image plane.

    ``kind`` is "dct" (real coefficients) or "fft" (complex, Hermitian
    for real input under orthonormal scaling).
    """

    coeffs: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ("dct", "fft"):
            raise ValueError(f"unknown spectral kind {self.kind!r}")
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.ndim != 2:
            raise ValueError("coefficients must form a 2-D matrix")


@dataclass
class WaveletPlanes:
    """Single-level Haar decomposition of one plane.

    Subband shape is (ceil(H/2), ceil(W/2)); odd source dims are
    replicate-padded before analysis and ``source_shape`` records the
    crop applied on reconstruction.
    """

    cA: np.ndarray
    cH: np.ndarray
    cV: np.ndarray
    cD: np.ndarray
    source_shape: tuple[int, int]


@dataclass
class Sinogram:
    """Parallel-beam projections: one column per angle, 1-pixel bins."""

    projections: np.ndarray
    angles: np.ndarray
    image_shape: tuple[int, int]

    def __post_init__(self) -> None:
        self.projections = np.asarray(self.projections, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.projections.ndim != 2:
            raise ValueError("projections must be a 2-D (bins x angles) matrix")
        if self.projections.shape[1] != self.angles.size:
            raise ValueError("one projection column per angle required")


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # K x D, orthonormal rows
    variances: np.ndarray  # K, non-increasing


def _check_plane(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.shape[0] < 2 or plane.shape[1] < 2:
        raise ValueError(f"expected a 2-D plane of at least 2x2, got shape {plane.shape}")
    return plane


# ---------------------------------------------------------------------------
# DCT / FFT
# ---------------------------------------------------------------------------

def dct2(plane: np.ndarray) -> SpectralPlane:
    """Orthonormal 2-D DCT-II; a constant NxN plane maps to coeff (0,0) = c*N."""
    plane = _check_plane(plane)
    return SpectralPlane(scipy.fft.dctn(plane, type=2, norm="ortho"), "dct")


def idct2(spec: SpectralPlane) -> np.ndarray:
    if spec.kind != "dct":
        raise ValueError("idct2 expects DCT coefficients")
    return scipy.fft.idctn(np.asarray(spec.coeffs, dtype=np.float64), type=2, norm="ortho")


def fft2(plane: np.ndarray) -> SpectralPlane:
    """Unitary 2-D DFT (norm="ortho"); real input gives a Hermitian spectrum."""
    plane = _check_plane(plane)
    return SpectralPlane(np.fft.fft2(plane, norm="ortho"), "fft")


def ifft2(spec: SpectralPlane) -> np.ndarray:
    """Unitary inverse DFT; returns the real part.

    Callers perturbing coefficients must keep Hermitian symmetry if they
    need the result to represent a real plane.
    """
    if spec.kind != "fft":
        raise ValueError("ifft2 expects FFT coefficients")
    return np.fft.ifft2(np.asarray(spec.coeffs), norm="ortho").real


# ---------------------------------------------------------------------------
# Haar DWT
# ---------------------------------------------------------------------------

def haar_dwt2(plane: np.ndarray) -> WaveletPlanes:
    """Single-level 2-D Haar analysis; odd dims replicate-pad the last row/col."""
    plane = _check_plane(plane)
    h, w = plane.shape
    if h % 2:
        plane = np.vstack([plane, plane[-1:, :]])
    if w % 2:
        plane = np.hstack([plane, plane[:, -1:]])

    lo_r = (plane[0::2, :] + plane[1::2, :]) / _SQRT2
    hi_r = (plane[0::2, :] - plane[1::2, :]) / _SQRT2
    cA = (lo_r[:, 0::2] + lo_r[:, 1::2]) / _SQRT2
    cV = (lo_r[:, 0::2] - lo_r[:, 1::2]) / _SQRT2
    cH = (hi_r[:, 0::2] + hi_r[:, 1::2]) / _SQRT2
    cD = (hi_r[:, 0::2] - hi_r[:, 1::2]) / _SQRT2
    return WaveletPlanes(cA, cH, cV, cD, (h, w))


def haar_idwt2(planes: WaveletPlanes) -> np.ndarray:
    """Perfect-reconstruction inverse of :func:`haar_dwt2`."""
    cA = np.asarray(planes.cA, dtype=np.float64)
    cH = np.asarray(planes.cH, dtype=np.float64)
    cV = np.asarray(planes.cV, dtype=np.float64)
    cD = np.asarray(planes.cD, dtype=np.float64)
    if not (cA.shape == cH.shape == cV.shape == cD.shape):
        raise ValueError("subband shapes must match")

    hh, hw = cA.shape
    lo_r = np.empty((hh, 2 * hw))
    hi_r = np.empty((hh, 2 * hw))
    lo_r[:, 0::2] = (cA + cV) / _SQRT2
    lo_r[:, 1::2] = (cA - cV) / _SQRT2
    hi_r[:, 0::2] = (cH + cD) / _SQRT2
    hi_r[:, 1::2] = (cH - cD) / _SQRT2

    out = np.empty((2 * hh, 2 * hw))
    out[0::2, :] = (lo_r + hi_r) / _SQRT2
    out[1::2, :] = (lo_r - hi_r) / _SQRT2
    h, w = planes.source_shape
    return out[:h, :w]


# ---------------------------------------------------------------------------
# Radon / inverse Radon
# ---------------------------------------------------------------------------

def _radon_geometry(h: int, w: int) -> tuple[int, int, int, float]:
    """Shared bin count and embedding offsets for radon and iradon."""
    nbins = int(np.ceil(np.hypot(h, w))) + 3
    off_r = (nbins - h) // 2
    off_c = (nbins - w) // 2
    center = (nbins - 1) / 2.0
    return nbins, off_r, off_c, center


def radon(plane: np.ndarray, angles) -> Sinogram:
    """Parallel projections by rotate-and-sum with bilinear resampling.

    Each column holds the line integrals over rays x*cos(t) + y*sin(t) = s
    (coordinates centered on the padded canvas), sampled at 1-pixel bins.
    """
    plane = _check_plane(plane)
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if angles.size == 0:
        raise ValueError("need at least one projection angle")
    if np.unique(angles).size != angles.size:
        raise ValueError("projection angles must be distinct")
    if (angles < 0).any() or (angles >= 180).any():
        raise ValueError("projection angles must lie in [0, 180)")

    h, w = plane.shape
    nbins, off_r, off_c, center = _radon_geometry(h, w)
    canvas = np.zeros((nbins, nbins))
    canvas[off_r:off_r + h, off_c:off_c + w] = plane

    coords = np.arange(nbins, dtype=np.float64) - center
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    out = np.empty((nbins, angles.size))
    for j, theta in enumerate(angles):
        rad = np.deg2rad(theta)
        c, s = np.cos(rad), np.sin(rad)
        # Inverse map of a rotation: sample at coordinates rotated by +theta.
        src_x = c * xs - s * ys
        src_y = s * xs + c * ys
        rotated = bilinear_sample(canvas, src_y + center, src_x + center, border="zero")
        out[:, j] = rotated.sum(axis=0)
    return Sinogram(out, angles, (h, w))


def _ramp_filter(size: int) -> np.ndarray:
    """Frequency response of the ramp (Ram-Lak) filter on ``size`` samples.

    Built from the exact real-space kernel so the DC term vanishes without
    the usual rectangular-window bias.
    """
    f = np.zeros(size)
    f[0] = 0.25
    odd = np.arange(1, size // 2 + 1, 2)
    f[odd] = -1.0 / (np.pi * odd) ** 2
    f[-odd] = -1.0 / (np.pi * odd) ** 2
    return 2.0 * np.real(np.fft.fft(f))


def iradon(sino: Sinogram) -> np.ndarray:
    """Filtered back-projection onto the sinogram's recorded image grid."""
    proj = sino.projections
    nbins, nangles = proj.shape
    h, w = sino.image_shape
    expected = _radon_geometry(h, w)[0]
    if nbins != expected:
        raise ValueError(f"sinogram has {nbins} bins but image shape implies {expected}")

    pad = max(64, int(2 ** np.ceil(np.log2(2 * nbins))))
    filt = _ramp_filter(pad)
    spectrum = np.fft.fft(proj, n=pad, axis=0) * filt[:, None]
    filtered = np.real(np.fft.ifft(spectrum, axis=0))[:nbins, :]

    _, off_r, off_c, center = _radon_geometry(h, w)
    xs = np.arange(w, dtype=np.float64) + off_c - center
    ys = np.arange(h, dtype=np.float64) + off_r - center
    xg, yg = np.meshgrid(xs, ys, indexing="xy")

    recon = np.zeros((h, w))
    bins = np.arange(nbins, dtype=np.float64)
    for j in range(nangles):
        rad = np.deg2rad(sino.angles[j])
        t = xg * np.cos(rad) + yg * np.sin(rad) + center
        recon += np.interp(t, bins, filtered[:, j], left=0.0, right=0.0)
    return recon * np.pi / (2.0 * nangles)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

def pca_fit(rows: np.ndarray, k: int) -> PcaBasis:
    """Fit a k-component PCA basis to the rows of an M x D matrix.

    Components come from the SVD of the centered data, so D >> M is fine.
    Signs are fixed so each component's largest-magnitude entry is
    positive; variances are the descending sample variances.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("expected an M x D matrix of row vectors")
    m, d = rows.shape
    if m < 2:
        raise ValueError(f"need at least 2 rows to fit a basis, got {m}")
    limit = min(m - 1, d)
    if not 1 <= k <= limit:
        raise ValueError(f"component count {k} outside [1, {limit}]")

    mean = rows.mean(axis=0)
    _, svals, vt = np.linalg.svd(rows - mean, full_matrices=False)
    components = vt[:k].copy()
    for comp in components:
        peak = np.argmax(np.abs(comp))
        if comp[peak] < 0:
            comp *= -1.0
    variances = svals[:k] ** 2 / (m - 1)
    return PcaBasis(mean, components, variances)


def pca_project(basis: PcaBasis, vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != basis.mean.shape:
        raise ValueError(f"vector length {vec.shape} does not match basis dim {basis.mean.shape}")
    return (vec - basis.mean) @ basis.components.T


def pca_reconstruct(basis: PcaBasis, coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (basis.components.shape[0],):
        raise ValueError("coordinate count does not match basis components")
    return coords @ basis.components + basis.mean


# ---------------------------------------------------------------------------
# Kernels and convolution
# ---------------------------------------------------------------------------

def make_kernel(kind: str, param: float) -> np.ndarray:
    """Build a small rotationally symmetric filter kernel.

    kind "disk": flat circular average of the given radius (sum 1);
    kind "gaussian": Gaussian of the given sigma (sum 1);
    kind "log": Laplacian of Gaussian of the given sigma (sum 0).
    """
    if param <= 0:
        raise ValueError(f"kernel parameter must be positive, got {param}")

    if kind == "disk":
        n = max(1, int(np.ceil(param)))
        ax = np.arange(-n, n + 1, dtype=np.float64)
        xx, yy = np.meshgrid(ax, ax)
        mask = (xx ** 2 + yy ** 2) <= param ** 2 + 1e-12
        return mask / mask.sum()

    n = max(1, int(np.ceil(2.0 * param)))
    ax = np.arange(-n, n + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    r2 = xx ** 2 + yy ** 2
    g = np.exp(-r2 / (2.0 * param ** 2))

    if kind == "gaussian":
        return g / g.sum()
    if kind == "log":
        g = g / g.sum()
        h = g * (r2 - 2.0 * param ** 2) / param ** 4
        return h - h.mean()  # exact zero mean
    raise ValueError(f"unknown kernel kind {kind!r}")


def conv2_same(plane: np.ndarray, kernel: np.ndarray, border: str = "replicate") -> np.ndarray:
    """2-D convolution keeping the input size, replicate border."""
    plane = _check_plane(plane)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValueError(f"kernel must have odd dimensions, got {kernel.shape}")
    if border != "replicate":
        raise ValueError(f"unsupported border mode {border!r}")
    return ndimage.convolve(plane, kernel, mode="nearest")
