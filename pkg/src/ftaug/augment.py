"""The fourteen augmentation pipelines app1..app14.

Every pipeline is a deterministic function of (image, companions, seed).
Randomness comes exclusively from :func:`derive_rng`, which derives one
independent PCG64 stream per output image from (seed, app_id, output
index); no global RNG state is ever touched, so pipelines are pure and
safe to run concurrently.

Output counts per pipeline: 3, 6, 4, 3, 3, 3, 7, 2, 6, 3, 3, 5, 3, 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .image import (
    WarpField,
    as_image,
    bilinear_sample,
    clamp01,
    hsv_to_rgb,
    lalphabeta_to_rgb,
    resize_bilinear,
    rgb_to_hsv,
    rgb_to_lalphabeta,
    warp_bilinear,
)
from .spectral import (
    PcaBasis,
    conv2_same,
    dct2,
    fft2,
    haar_dwt2,
    haar_idwt2,
    idct2,
    ifft2,
    iradon,
    make_kernel,
    pca_project,
    pca_reconstruct,
    radon,
)

APP_OUTPUT_COUNTS = {
    1: 3, 2: 6, 3: 4, 4: 3, 5: 3, 6: 3, 7: 7,
    8: 2, 9: 6, 10: 3, 11: 3, 12: 5, 13: 3, 14: 2,
}

# (same-class, other-class) companion counts per pipeline.
COMPANION_POLICY = {
    4: (5, 0), 5: (5, 0), 8: (1, 0), 10: (5, 0), 11: (5, 0), 12: (3, 2),
}

# Pipelines that only make sense on 3-channel input.
COLOR_ONLY = frozenset({6, 7, 8})

_MODE_SEQUENCE = ("zero_p", "add_noise", "swap_p")


def derive_rng(seed: int, app_id: int, image_index: int) -> np.random.Generator:
    """Independent stream for one output image.

    Streams are keyed by (seed, app_id, image_index) through SeedSequence
    spawn keys, so reordering or parallelizing outputs cannot change any
    draw. Channels of one output consume the same stream sequentially.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(app_id), int(image_index)))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------

@dataclass
class PerturbationMode:
    """One of the three coefficient perturbations.

    mode "zero_p": zero each element with probability p (default 0.5);
    mode "add_noise": additive noise, p unused;
    mode "swap_p": swap each element with probability p (default 0.05)
    against a uniformly chosen companion.
    """

    mode: str
    p: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODE_SEQUENCE:
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if self.p is None:
            self.p = {"zero_p": 0.5, "add_noise": 1.0, "swap_p": 0.05}[self.mode]
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability {self.p} outside [0, 1]")


@dataclass
class GeometricParams:
    """Affine parameters; ranges match what the geometric pipelines draw."""

    reflect_tb: bool = False
    reflect_lr: bool = False
    scale_x: float = 1.0
    scale_y: float = 1.0
    rotation_deg: float = 0.0
    translate_x: float = 0.0
    translate_y: float = 0.0
    shear_x_deg: float = 0.0
    shear_y_deg: float = 0.0

    def __post_init__(self) -> None:
        if not (1.0 <= self.scale_x <= 2.0 and 1.0 <= self.scale_y <= 2.0):
            raise ValueError("scale factors must lie in [1, 2]")
        if not -10.0 <= self.rotation_deg <= 10.0:
            raise ValueError("rotation must lie in [-10, 10] degrees")
        if not (0.0 <= self.translate_x <= 5.0 and 0.0 <= self.translate_y <= 5.0):
            raise ValueError("translation must lie in [0, 5] pixels")
        if not (0.0 <= self.shear_x_deg <= 30.0 and 0.0 <= self.shear_y_deg <= 30.0):
            raise ValueError("shear must lie in [0, 30] degrees")


@dataclass
class AugmentationSpec:
    """Pipeline selector plus its knobs and companion requirements."""

    app_id: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.app_id not in APP_OUTPUT_COUNTS:
            raise ValueError(f"app_id must be 1..14, got {self.app_id}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def companion_policy(self) -> tuple[int, int]:
        """(same-class, other-class) companion counts this pipeline needs."""
        return COMPANION_POLICY.get(self.app_id, (0, 0))

    @property
    def output_count(self) -> int:
        return APP_OUTPUT_COUNTS[self.app_id]


# ---------------------------------------------------------------------------
# Geometric transform
# ---------------------------------------------------------------------------

def geometric_transform(img: np.ndarray, params: GeometricParams) -> np.ndarray:
    """Affine warp about the image center, bilinear, replicate border.

    Reflection-only parameter sets take an exact flip path with no
    interpolation. Translation moves content right/down by the given
    pixel counts. Transform order (applied to content): reflect, scale,
    shear, rotate, translate.
    """
    img = as_image(img)
    affine_active = (
        params.scale_x != 1.0 or params.scale_y != 1.0
        or params.rotation_deg != 0.0
        or params.translate_x != 0.0 or params.translate_y != 0.0
        or params.shear_x_deg != 0.0 or params.shear_y_deg != 0.0
    )
    if not affine_active:
        out = img
        if params.reflect_tb:
            out = out[::-1, :, :]
        if params.reflect_lr:
            out = out[:, ::-1, :]
        return out.copy()

    theta = np.deg2rad(params.rotation_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    shear = np.array([[1.0, np.tan(np.deg2rad(params.shear_x_deg))],
                      [np.tan(np.deg2rad(params.shear_y_deg)), 1.0]])
    scale = np.diag([params.scale_x, params.scale_y])
    reflect = np.diag([-1.0 if params.reflect_lr else 1.0,
                       -1.0 if params.reflect_tb else 1.0])
    fwd = rot @ shear @ scale @ reflect
    inv = np.linalg.inv(fwd)

    h, w = img.shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
    qx = cols - cx - params.translate_x
    qy = rows - cy - params.translate_y
    src_x = inv[0, 0] * qx + inv[0, 1] * qy + cx
    src_y = inv[1, 0] * qx + inv[1, 1] * qy + cy

    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = bilinear_sample(img[:, :, c], src_y, src_x, border="replicate")
    return out


# ---------------------------------------------------------------------------
# Color / tone helpers
# ---------------------------------------------------------------------------

def contrast_rescale(img: np.ndarray, a: float, b: float) -> np.ndarray:
    """Linearly map [a, b] onto [0, 1]; values below a clip to 0, above b to 1."""
    if not 0.0 <= a < b <= 1.0:
        raise ValueError(f"need 0 <= a < b <= 1, got a={a} b={b}")
    return np.clip((as_image(img) - a) / (b - a), 0.0, 1.0)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    kernel = make_kernel("gaussian", sigma)
    img = as_image(img)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = conv2_same(img[:, :, c], kernel)
    return out


def sharpness_residual(img: np.ndarray) -> np.ndarray:
    """Original minus its sigma=1 Gaussian blur, min-max rescaled to [0, 1].

    A flat residual (constant input) maps to the zero image.
    """
    img = as_image(img)
    residual = img - gaussian_blur(img, 1.0)
    lo, hi = residual.min(), residual.max()
    if hi - lo < 1e-12:
        return np.zeros_like(img)
    return (residual - lo) / (hi - lo)


def color_shift(img: np.ndarray, shifts) -> np.ndarray:
    """Add shifts[c]/255 to channel c, clamped; shifts are three integers."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise ValueError("color_shift requires a 3-channel image")
    shifts = np.asarray(shifts, dtype=np.float64)
    if shifts.shape != (3,):
        raise ValueError("need exactly three channel shifts")
    return clamp01(img + shifts[None, None, :] / 255.0)


def hsv_jitter(img: np.ndarray, hue_d: float, sat_d: float, val_d: float,
               contrast_f: float) -> np.ndarray:
    """Hue rotation plus saturation/value offsets and value contrast.

    Hue wraps mod 1; the contrast factor stretches value about 0.5 after
    the offset; saturation and value clamp to [0, 1] at the end.
    """
    hsv = rgb_to_hsv(img)
    h = (hsv[:, :, 0] + hue_d) % 1.0
    s = np.clip(hsv[:, :, 1] + sat_d, 0.0, 1.0)
    v = (hsv[:, :, 2] + val_d - 0.5) * contrast_f + 0.5
    v = np.clip(v, 0.0, 1.0)
    return hsv_to_rgb(np.stack([h, s, v], axis=2))


def histogram_specification(img: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Per-channel rank mapping of img onto target's value distribution.

    Works for different pixel counts; output values are drawn from the
    target's value set, and ranks are assigned by stable sort so ties
    keep raster order.
    """
    img = as_image(img)
    target = as_image(target)
    if img.shape[2] != target.shape[2]:
        raise ValueError("source and target channel counts differ")
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        src = img[:, :, c].ravel()
        tgt = np.sort(target[:, :, c].ravel())
        ns, nt = src.size, tgt.size
        order = np.argsort(src, kind="stable")
        picks = np.minimum((np.arange(ns) * nt) // ns, nt - 1)
        mapped = np.empty(ns)
        mapped[order] = tgt[picks]
        out[:, :, c] = mapped.reshape(img.shape[:2])
    return out


def reinhard_normalize(img: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Match per-channel mean/std to the target in the log-LMS opponent space.

    A zero-variance source channel copies the target mean (degenerate
    rule). Output returns to RGB clamped.
    """
    lab_src = rgb_to_lalphabeta(img)
    lab_tgt = rgb_to_lalphabeta(target)
    out = np.empty_like(lab_src)
    for c in range(3):
        x = lab_src[:, :, c]
        mu_s, sd_s = x.mean(), x.std()
        mu_t, sd_t = lab_tgt[:, :, c].mean(), lab_tgt[:, :, c].std()
        if sd_s < 1e-12:
            out[:, :, c] = mu_t
        else:
            out[:, :, c] = (x - mu_s) * (sd_t / sd_s) + mu_t
    return lalphabeta_to_rgb(out)


# ---------------------------------------------------------------------------
# Displacement fields
# ---------------------------------------------------------------------------

_FIELD_KERNELS = {"disk": ("disk", 5.0), "gaussian": ("gaussian", 4.0), "log": ("log", 0.5)}
_GRID_SIZE = 8


def make_displacement_field(dims: tuple[int, int], method: str, filter_kind: str,
                            amplitude_px: float, rng: np.random.Generator) -> WarpField:
    """Random smooth displacement field.

    Raw components are U(-1, 1), drawn per pixel ("perpixel") or on an
    8x8 grid bilinearly upsampled ("grid"), low-pass filtered with the
    named kernel (disk r=5 / gaussian sigma=4 / LoG sigma=0.5), then
    scaled by amplitude_px. dx is drawn before dy.
    """
    if method not in ("perpixel", "grid"):
        raise ValueError(f"unknown field method {method!r}")
    if filter_kind not in _FIELD_KERNELS:
        raise ValueError(f"unknown field filter {filter_kind!r}")
    h, w = dims
    kernel = make_kernel(*_FIELD_KERNELS[filter_kind])

    def raw() -> np.ndarray:
        if method == "perpixel":
            return rng.uniform(-1.0, 1.0, (h, w))
        grid = rng.uniform(-1.0, 1.0, (_GRID_SIZE, _GRID_SIZE))
        return resize_bilinear(grid[:, :, None], h, w)[:, :, 0]

    dx = conv2_same(raw(), kernel) * amplitude_px
    dy = conv2_same(raw(), kernel) * amplitude_px
    return WarpField(dx, dy)


# ---------------------------------------------------------------------------
# Coefficient perturbation
# ---------------------------------------------------------------------------

def perturb_coefficients(coeffs: np.ndarray, mode: PerturbationMode,
                         companions=None, rng: np.random.Generator | None = None,
                         protect_dc: bool = False,
                         noise_constant: float | None = None) -> np.ndarray:
    """Apply one perturbation mode to a coefficient array.

    zero_p: each element zeroed independently with probability p.
    add_noise: each element gets sigma * U(-0.5, 0.5) where sigma is the
    std of the input array; if noise_constant is given that single value
    is added to every element instead (no draws consumed).
    swap_p: each element replaced with probability p by the matching
    element of one of exactly 5 companion arrays, chosen uniformly.
    protect_dc restores the first element afterwards in every mode.

    RNG consumption is fixed-shape (masks and choices are drawn in full)
    so the stream position never depends on the data.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    out = coeffs.copy()

    if mode.mode == "zero_p":
        mask = rng.random(coeffs.shape) < mode.p
        out[mask] = 0.0
    elif mode.mode == "add_noise":
        if noise_constant is not None:
            out += noise_constant
        else:
            sigma = coeffs.std()
            out += sigma * rng.uniform(-0.5, 0.5, coeffs.shape)
    else:  # swap_p
        if companions is None or len(companions) != 5:
            raise ValueError("swap mode requires exactly 5 companion coefficient sets")
        stack = np.stack([np.asarray(c, dtype=np.float64) for c in companions])
        if stack.shape[1:] != coeffs.shape:
            raise ValueError("companion coefficient shapes must match the input")
        mask = rng.random(coeffs.shape) < mode.p
        choice = rng.integers(0, 5, coeffs.shape)
        flat_out = out.reshape(-1)
        flat_mask = mask.reshape(-1)
        flat_choice = choice.reshape(-1)
        flat_stack = stack.reshape(5, -1)
        idx = np.nonzero(flat_mask)[0]
        flat_out[idx] = flat_stack[flat_choice[idx], idx]
        out = flat_out.reshape(coeffs.shape)

    if protect_dc:
        first = (0,) * coeffs.ndim
        out[first] = coeffs[first]
    return out


def feature_jitter(img: np.ndarray, companions, seed: int, app_id: int,
                   forward, inverse, noise_rule: str = "coeff_sigma",
                   protect_dc: bool = False, return_arrays: bool = False,
                   zero_p: float | None = None, swap_p: float | None = None):
    """Shared engine behind app4/app5/app10/app11.

    ``forward(plane) -> list of arrays`` and ``inverse(list, shape) ->
    plane`` define the feature transform. Three outputs are produced, one
    per mode (zero_p 0.5, add_noise, swap_p 0.05 against 5 same-class
    companions). noise_rule "coeff_sigma" adds per-element noise scaled by
    each array's own std; "image_std_constant" adds one constant per
    channel equal to std(channel plane) + U(-0.5, 0.5).

    Each output uses derive_rng(seed, app_id, output_index); channels
    consume the stream sequentially, arrays in forward() order.
    """
    img = as_image(img)
    if len(companions) != 5:
        raise ValueError(f"need exactly 5 same-class companions, got {len(companions)}")
    companions = [as_image(c) for c in companions]
    for comp in companions:
        if comp.shape != img.shape:
            raise ValueError("companion dimensions must match the input image")
    if noise_rule not in ("coeff_sigma", "image_std_constant"):
        raise ValueError(f"unknown noise rule {noise_rule!r}")

    comp_arrays = [
        [forward(comp[:, :, c]) for c in range(img.shape[2])] for comp in companions
    ]
    images = []
    kept = []
    overrides = {"zero_p": zero_p, "swap_p": swap_p}
    for out_idx, mode_name in enumerate(_MODE_SEQUENCE):
        rng = derive_rng(seed, app_id, out_idx)
        mode = PerturbationMode(mode_name, overrides.get(mode_name))
        planes = []
        arrays_this = []
        for c in range(img.shape[2]):
            arrays = forward(img[:, :, c])
            const = None
            if mode_name == "add_noise" and noise_rule == "image_std_constant":
                const = img[:, :, c].std() + rng.uniform(-0.5, 0.5)
            perturbed = []
            for a_idx, arr in enumerate(arrays):
                comps = [comp_arrays[k][c][a_idx] for k in range(5)]
                perturbed.append(perturb_coefficients(
                    arr, mode, companions=comps if mode_name == "swap_p" else None,
                    rng=rng, protect_dc=protect_dc, noise_constant=const))
            arrays_this.append(perturbed)
            planes.append(inverse(perturbed, img.shape[:2]))
        images.append(clamp01(np.stack(planes, axis=2)))
        kept.append(arrays_this)
    if return_arrays:
        return images, kept
    return images


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def app1_reflect_scale(img: np.ndarray, seed: int) -> list[np.ndarray]:
    """Top-bottom flip, left-right flip, and a random [1,2]^2 center zoom."""
    img = as_image(img)
    rng = derive_rng(seed, 1, 2)
    sx, sy = rng.uniform(1.0, 2.0, 2)
    return [
        geometric_transform(img, GeometricParams(reflect_tb=True)),
        geometric_transform(img, GeometricParams(reflect_lr=True)),
        geometric_transform(img, GeometricParams(scale_x=sx, scale_y=sy)),
    ]


def _random_geometry(img, seed, app_id, idx, kind):
    rng = derive_rng(seed, app_id, idx)
    if kind == "scale":
        sx, sy = rng.uniform(1.0, 2.0, 2)
        return geometric_transform(img, GeometricParams(scale_x=sx, scale_y=sy))
    if kind == "rotate":
        deg = rng.uniform(-10.0, 10.0)
        return geometric_transform(img, GeometricParams(rotation_deg=deg))
    if kind == "translate":
        tx, ty = rng.uniform(0.0, 5.0, 2)
        return geometric_transform(img, GeometricParams(translate_x=tx, translate_y=ty))
    sx, sy = rng.uniform(0.0, 30.0, 2)
    return geometric_transform(img, GeometricParams(shear_x_deg=sx, shear_y_deg=sy))


def app2_affine(img: np.ndarray, seed: int) -> list[np.ndarray]:
    """The app1 trio plus one rotated, one translated, and one sheared image."""
    img = as_image(img)
    return [
        geometric_transform(img, GeometricParams(reflect_tb=True)),
        geometric_transform(img, GeometricParams(reflect_lr=True)),
        _random_geometry(img, seed, 2, 2, "scale"),
        _random_geometry(img, seed, 2, 3, "rotate"),
        _random_geometry(img, seed, 2, 4, "translate"),
        _random_geometry(img, seed, 2, 5, "shear"),
    ]


def app3_affine(img: np.ndarray, seed: int) -> list[np.ndarray]:
    """Both flips plus one rotated and one translated image (4 outputs)."""
    img = as_image(img)
    return [
        geometric_transform(img, GeometricParams(reflect_tb=True)),
        geometric_transform(img, GeometricParams(reflect_lr=True)),
        _random_geometry(img, seed, 3, 2, "rotate"),
        _random_geometry(img, seed, 3, 3, "translate"),
    ]


def app4_pca(img, companions, seed: int, basis: PcaBasis,
             return_arrays: bool = False):
    """Perturb per-channel PCA projections under a shared flattened-plane basis.

    The basis must be fitted on planes of the image's own H*W size. A
    degenerate basis (constant training rows) is handled, not an error:
    members of the training set project to zero and reconstruct to the
    basis mean; other inputs pass through whatever orthonormal completion
    the factorization produced, deterministically.
    """
    img = as_image(img)
    if basis.mean.size != img.shape[0] * img.shape[1]:
        raise ValueError("basis dimension does not match the image plane size")

    def forward(plane):
        return [pca_project(basis, plane.ravel())]

    def inverse(arrays, shape):
        return pca_reconstruct(basis, arrays[0]).reshape(shape)

    return feature_jitter(img, companions, seed, 4, forward, inverse,
                          noise_rule="coeff_sigma", protect_dc=False,
                          return_arrays=return_arrays)


def app5_dct(img, companions, seed: int, return_arrays: bool = False):
    """Perturb per-channel DCT coefficients; the DC term is never changed."""

    def forward(plane):
        return [dct2(plane).coeffs]

    def inverse(arrays, shape):
        from .spectral import SpectralPlane
        return idct2(SpectralPlane(arrays[0], "dct"))

    return feature_jitter(img, companions, seed, 5, forward, inverse,
                          noise_rule="coeff_sigma", protect_dc=True,
                          return_arrays=return_arrays)


def _haar_forward(plane):
    wp = haar_dwt2(plane)
    return [wp.cA, wp.cH, wp.cV, wp.cD]


def app10_dwt(img, companions, seed: int, return_arrays: bool = False):
    """Perturb the four Haar subbands; additive noise is one constant per
    channel, std(channel) + U(-0.5, 0.5)."""
    img = as_image(img)
    shape = img.shape[:2]

    def inverse(arrays, _shape):
        from .spectral import WaveletPlanes
        padded = (shape[0] + shape[0] % 2, shape[1] + shape[1] % 2)
        wp = WaveletPlanes(arrays[0], arrays[1], arrays[2], arrays[3], padded)
        return haar_idwt2(wp)[:shape[0], :shape[1]]

    return feature_jitter(img, companions, seed, 10, _haar_forward, inverse,
                          noise_rule="image_std_constant", protect_dc=False,
                          return_arrays=return_arrays)


def app11_backend(img, companions, seed: int, backend=None,
                  zero_p: float | None = None, swap_p: float | None = None):
    """The app10 perturbation scheme over a pluggable invertible transform.

    The backend must expose forward(plane) -> list of arrays and
    inverse(list, shape) -> plane. Without one the pipeline is
    unsupported.
    """
    if backend is None:
        raise ValueError("app11 is unsupported without a plugged transform backend")
    return feature_jitter(img, companions, seed, 11, backend.forward, backend.inverse,
                          noise_rule="image_std_constant", protect_dc=False,
                          zero_p=zero_p, swap_p=swap_p)


def app6_tone(img: np.ndarray, seed: int, a_range=(0.02, 0.2), b_range=(0.8, 0.98),
              shift_max: int = 25) -> list[np.ndarray]:
    """Contrast rescale, sharpness residual, and a random channel shift."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise ValueError("app6 is color-only")
    rng = derive_rng(seed, 6, 0)
    a = rng.uniform(*a_range)
    b = rng.uniform(*b_range)
    contrast = contrast_rescale(img, a, b)
    residual = sharpness_residual(img)
    rng = derive_rng(seed, 6, 2)
    shifts = rng.integers(-shift_max, shift_max + 1, 3)
    return [contrast, residual, color_shift(img, shifts)]


def app7_jitter(img: np.ndarray, seed: int) -> list[np.ndarray]:
    """Four HSV jitters, a random blur, an unsharp mask, and a channel shift."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise ValueError("app7 is color-only")
    out = []
    for idx in range(4):
        rng = derive_rng(seed, 7, idx)
        hue_d = rng.uniform(0.05, 0.15)
        sat_d = rng.uniform(-0.4, -0.1)
        val_d = rng.uniform(-0.3, -0.1)
        contrast_f = rng.uniform(1.2, 1.4)
        out.append(hsv_jitter(img, hue_d, sat_d, val_d, contrast_f))
    rng = derive_rng(seed, 7, 4)
    out.append(gaussian_blur(img, rng.uniform(1.0, 6.0)))
    out.append(clamp01(img + 2.0 * (img - gaussian_blur(img, 1.0))))
    rng = derive_rng(seed, 7, 6)
    out.append(color_shift(img, rng.integers(-25, 26, 3)))
    return out


def app8_mappings(img: np.ndarray, target: np.ndarray) -> list[np.ndarray]:
    """Histogram specification and Reinhard normalization onto one
    same-class target; no randomness beyond the companion choice."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise ValueError("app8 is color-only")
    return [histogram_specification(img, target), reinhard_normalize(img, target)]


def app9_elastic(img: np.ndarray, seed: int, amplitude_px: float = 15.0) -> list[np.ndarray]:
    """Six elastic warps: {perpixel, 8x8 grid} x {disk, gaussian, log} fields."""
    img = as_image(img)
    out = []
    idx = 0
    for method in ("perpixel", "grid"):
        for filter_kind in ("disk", "gaussian", "log"):
            rng = derive_rng(seed, 9, idx)
            fld = make_displacement_field(img.shape[:2], method, filter_kind,
                                          amplitude_px, rng)
            out.append(warp_bilinear(img, fld))
            idx += 1
    return out


def app12_dct_mix(img, same_class, other_class, seed: int, p: float = 0.2) -> list[np.ndarray]:
    """Cumulative DCT averaging against 3 same-class then 2 other-class
    companions; the running image is emitted after each step (5 outputs).

    Masks are drawn per channel; the cumulative coefficient state is never
    clamped, only the emitted reconstructions are.
    """
    img = as_image(img)
    if len(same_class) != 3 or len(other_class) != 2:
        raise ValueError("app12 needs exactly 3 same-class and 2 other-class companions")
    companions = [as_image(c) for c in list(same_class) + list(other_class)]
    for comp in companions:
        if comp.shape != img.shape:
            raise ValueError("companion dimensions must match the input image")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"averaging probability {p} outside [0, 1]")

    state = [dct2(img[:, :, c]).coeffs.copy() for c in range(img.shape[2])]
    from .spectral import SpectralPlane
    out = []
    for step, comp in enumerate(companions):
        rng = derive_rng(seed, 12, step)
        for c in range(img.shape[2]):
            mask = rng.random(state[c].shape) < p
            new = dct2(comp[:, :, c]).coeffs
            state[c][mask] = (state[c][mask] + new[mask]) / 2.0
        planes = [idct2(SpectralPlane(s, "dct")) for s in state]
        out.append(clamp01(np.stack(planes, axis=2)))
    return out


def app13_radon(img: np.ndarray, seed: int, total_angles: int = 180,
                keep_angles: int = 160, zero_columns: int = 27) -> list[np.ndarray]:
    """Three Radon-space degradations, reconstructed by filtered
    back-projection.

    image1: project over a random subset of keep_angles angles, invert.
    image2: project over all angles, zero zero_columns random sinogram
    columns, invert. image3: both — the zeroed columns are chosen among
    the kept ones. Angle/column draws are shared across channels.
    """
    img = as_image(img)
    if not 0 < keep_angles <= total_angles:
        raise ValueError("keep_angles must lie in (0, total_angles]")
    if not 0 <= zero_columns <= keep_angles:
        raise ValueError("zero_columns must not exceed keep_angles")
    all_angles = np.arange(total_angles, dtype=np.float64) * (180.0 / total_angles)

    def reconstruct(angles, kill=None):
        planes = []
        for c in range(img.shape[2]):
            sino = radon(img[:, :, c], angles)
            if kill is not None:
                sino.projections[:, kill] = 0.0
            planes.append(iradon(sino))
        return clamp01(np.stack(planes, axis=2))

    rng = derive_rng(seed, 13, 0)
    kept = np.sort(rng.choice(total_angles, keep_angles, replace=False))
    img1 = reconstruct(all_angles[kept])

    rng = derive_rng(seed, 13, 1)
    cols = rng.choice(total_angles, zero_columns, replace=False)
    img2 = reconstruct(all_angles, kill=cols)

    rng = derive_rng(seed, 13, 2)
    kept3 = np.sort(rng.choice(total_angles, keep_angles, replace=False))
    cols3 = rng.choice(keep_angles, zero_columns, replace=False)
    img3 = reconstruct(all_angles[kept3], kill=cols3)
    return [img1, img2, img3]


def _hermitian_mask(shape: tuple[int, int], p: float, rng: np.random.Generator) -> np.ndarray:
    """Random boolean mask where (i, j) and (-i, -j) always share one draw."""
    h, w = shape
    u = rng.random((h, w))
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    ci = (-ii) % h
    cj = (-jj) % w
    primary = (ii < ci) | ((ii == ci) & (jj <= cj))
    shared = np.where(primary, u, u[ci, cj])
    return shared < p


def app14_spectral(img: np.ndarray, seed: int, p: float = 0.5, cutoff: int = 40) -> list[np.ndarray]:
    """FFT coefficient dropout and a DCT low-pass (2 outputs).

    image1 zeroes each FFT coefficient with probability p; the mask is
    mirrored across Hermitian pairs so the inverse stays real. image2
    zeroes every DCT coefficient with row index > cutoff AND column index
    > cutoff (0-based); images smaller than the cutoff pass through
    unchanged because no coefficient qualifies.
    """
    img = as_image(img)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mask probability {p} outside [0, 1]")
    from .spectral import SpectralPlane

    rng = derive_rng(seed, 14, 0)
    planes = []
    for c in range(img.shape[2]):
        coeffs = fft2(img[:, :, c]).coeffs.copy()
        coeffs[_hermitian_mask(coeffs.shape, p, rng)] = 0.0
        planes.append(ifft2(SpectralPlane(coeffs, "fft")))
    img1 = clamp01(np.stack(planes, axis=2))

    planes = []
    for c in range(img.shape[2]):
        coeffs = dct2(img[:, :, c]).coeffs.copy()
        coeffs[cutoff + 1:, cutoff + 1:] = 0.0
        planes.append(idct2(SpectralPlane(coeffs, "dct")))
    img2 = clamp01(np.stack(planes, axis=2))
    return [img1, img2]


# ---------------------------------------------------------------------------
# Dispatcher
# ---------------------------------------------------------------------------

def apply_app(spec: AugmentationSpec, img: np.ndarray, companions=(),
              seed: int | None = None) -> list[np.ndarray]:
    """Run one pipeline and return exactly its contracted output count.

    companions must match spec.companion_policy; for app12 the list is
    ordered same-class first (3) then other-class (2). Color-only
    pipelines (6, 7, 8) reject 1-channel images. app4 needs a fitted
    "pca_basis" in spec.params; app11 needs a "backend".
    """
    img = as_image(img)
    if seed is None:
        seed = spec.seed
    need_same, need_other = spec.companion_policy
    need = need_same + need_other
    if len(companions) != need:
        raise ValueError(
            f"app{spec.app_id} needs {need_same} same-class"
            + (f" + {need_other} other-class" if need_other else "")
            + f" companions, got {len(companions)}")
    if spec.app_id in COLOR_ONLY and img.shape[2] == 1:
        raise ValueError(f"app{spec.app_id} is color-only; got a 1-channel image")

    p = spec.params
    if spec.app_id == 1:
        out = app1_reflect_scale(img, seed)
    elif spec.app_id == 2:
        out = app2_affine(img, seed)
    elif spec.app_id == 3:
        out = app3_affine(img, seed)
    elif spec.app_id == 4:
        basis = p.get("pca_basis")
        if basis is None:
            raise ValueError("app4 requires a fitted pca_basis in spec.params")
        out = app4_pca(img, companions, seed, basis)
    elif spec.app_id == 5:
        out = app5_dct(img, companions, seed)
    elif spec.app_id == 6:
        out = app6_tone(img, seed,
                        a_range=p.get("a_range", (0.02, 0.2)),
                        b_range=p.get("b_range", (0.8, 0.98)),
                        shift_max=p.get("shift_max", 25))
    elif spec.app_id == 7:
        out = app7_jitter(img, seed)
    elif spec.app_id == 8:
        out = app8_mappings(img, companions[0])
    elif spec.app_id == 9:
        out = app9_elastic(img, seed, amplitude_px=p.get("amplitude_px", 15.0))
    elif spec.app_id == 10:
        out = app10_dwt(img, companions, seed)
    elif spec.app_id == 11:
        out = app11_backend(img, companions, seed, backend=p.get("backend"))
    elif spec.app_id == 12:
        out = app12_dct_mix(img, companions[:3], companions[3:], seed,
                            p=p.get("p", 0.2))
    elif spec.app_id == 13:
        out = app13_radon(img, seed,
                          total_angles=p.get("total_angles", 180),
                          keep_angles=p.get("keep_angles", 160),
                          zero_columns=p.get("zero_columns", 27))
    else:
        out = app14_spectral(img, seed, p=p.get("p", 0.5), cutoff=p.get("cutoff", 40))

    if len(out) != spec.output_count:
        raise AssertionError(
            f"app{spec.app_id} produced {len(out)} outputs, contract says {spec.output_count}")
    return out
