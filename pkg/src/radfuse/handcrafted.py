"""Handcrafted feature extraction: 308 features per 224x224 grayscale image.

Six transform families, each reduced by the 14 measures of
:func:`radfuse.stats.compute_stats`:

======== ======================================================== ========
group    transform output fed to the statistics                   features
======== ======================================================== ========
texture  the raw pixel vector                                     14
glcm     flattened 256x256 co-occurrence counts, 4 directions     56
gldm     256-bin absolute-difference histogram, 4 directions      56
fft      floor(|fftshift(fft2(image))|)                           14
wavelet  Haar DWT subbands, 2 levels x (A, H, V, D)               112
lbp      8-point local binary pattern codes, radii 2/3/5/7        56
======== ======================================================== ========

Concatenated in the table's order the vector has exactly 308 components.
"""

from __future__ import annotations

import math

import numpy as np

from .stats import compute_stats

# (name, length) in concatenation order.
FEATURE_GROUPS = (
    ("texture", 14),
    ("glcm", 56),
    ("gldm", 56),
    ("fft", 14),
    ("wavelet", 112),
    ("lbp", 56),
)
GROUP_NAMES = tuple(name for name, _ in FEATURE_GROUPS)
HANDCRAFTED_LENGTH = sum(n for _, n in FEATURE_GROUPS)  # 308

GLCM_ANGLES = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
# angle -> (row step, col step); rows grow downward, so "up" is -1.
_GLCM_OFFSETS = {
    0: (0, 1),
    1: (-1, 1),
    2: (-1, 0),
    3: (-1, -1),
}

GLDM_ANGLES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
GLDM_DISTANCE = 10
_GLDM_STEPS = {
    0: (0, 1),
    1: (-1, 0),
    2: (0, -1),
    3: (1, 0),
}

LBP_RADII = (2, 3, 5, 7)
LBP_POINTS = 8


def _angle_index(angle: float, table) -> int:
    for idx, ref in enumerate(table):
        if math.isclose(angle, ref, abs_tol=1e-9):
            return idx
    raise ValueError(f"unsupported direction {angle!r}; expected one of {table}")


def _shifted_pair(img: np.ndarray, dr: int, dc: int):
    """Views (a, b) of all in-bounds pixel pairs (p, p + (dr, dc))."""
    h, w = img.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    a = img[r0:r1, c0:c1]
    b = img[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    return a, b


def texture_features(img: np.ndarray) -> np.ndarray:
    """Statistics of the image treated as one flat pixel vector."""
    return compute_stats(img.astype(np.float64).ravel())


def glcm_matrix(img: np.ndarray, angle: float) -> np.ndarray:
    """Gray-level co-occurrence counts at offset 1 for one direction.

    ``M[a, b]`` counts pixel pairs with value ``a`` whose neighbor in the
    given direction has value ``b``. Counts are neither symmetrized nor
    normalized; 256 gray levels are always used.
    """
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("glcm_matrix expects a 2-D uint8 image")
    dr, dc = _GLCM_OFFSETS[_angle_index(angle, GLCM_ANGLES)]
    a, b = _shifted_pair(img, dr, dc)
    joint = a.astype(np.int64).ravel() * 256 + b.astype(np.int64).ravel()
    return np.bincount(joint, minlength=256 * 256).reshape(256, 256)


def glcm_features(img: np.ndarray) -> np.ndarray:
    """14 statistics of the flattened GLCM for each of the 4 directions (56)."""
    parts = [
        compute_stats(glcm_matrix(img, angle).astype(np.float64).ravel())
        for angle in GLCM_ANGLES
    ]
    return np.concatenate(parts)


def gldm_histogram(img: np.ndarray, angle: float, distance: int = GLDM_DISTANCE) -> np.ndarray:
    """Normalized histogram of absolute gray-level differences at ``distance``.

    Entry ``h[d]`` is the fraction of valid pixel pairs whose absolute
    intensity difference equals ``d``; the 256 entries sum to 1.
    """
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("gldm_histogram expects a 2-D uint8 image")
    step_r, step_c = _GLDM_STEPS[_angle_index(angle, GLDM_ANGLES)]
    dr, dc = step_r * distance, step_c * distance
    h, w = img.shape
    if (dr != 0 and h <= distance) or (dc != 0 and w <= distance):
        raise ValueError(
            f"image {img.shape} too small for GLDM displacement {distance} at angle {angle}"
        )
    a, b = _shifted_pair(img, dr, dc)
    diff = np.abs(a.astype(np.int16) - b.astype(np.int16))
    counts = np.bincount(diff.ravel(), minlength=256).astype(np.float64)
    return counts / diff.size


def gldm_features(img: np.ndarray) -> np.ndarray:
    """14 statistics of the difference histogram for each of 4 directions (56)."""
    parts = [compute_stats(gldm_histogram(img, angle)) for angle in GLDM_ANGLES]
    return np.concatenate(parts)


def fft_magnitude(img: np.ndarray) -> np.ndarray:
    """Centered 2-D DFT magnitude spectrum (before the integer floor)."""
    return np.abs(np.fft.fftshift(np.fft.fft2(img.astype(np.float64))))


def fft_features(img: np.ndarray) -> np.ndarray:
    """14 statistics of the floored, centered magnitude spectrum."""
    return compute_stats(np.floor(fft_magnitude(img)).ravel())


def _haar_step(x: np.ndarray, axis: int):
    """One orthonormal Haar analysis step along ``axis``.

    Odd lengths are extended by duplicating the edge sample (never needed
    for the 224 -> 112 -> 56 chain).
    """
    n = x.shape[axis]
    if n % 2 == 1:
        edge = np.take(x, [n - 1], axis=axis)
        x = np.concatenate([x, edge], axis=axis)
    even = np.take(x, range(0, x.shape[axis], 2), axis=axis)
    odd = np.take(x, range(1, x.shape[axis], 2), axis=axis)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    return (even + odd) * inv_sqrt2, (even - odd) * inv_sqrt2


def haar_dwt2(x: np.ndarray):
    """Single-level separable 2-D Haar transform.

    Returns ``(cA, cH, cV, cD)``: approximation, horizontal detail
    (high-pass along rows), vertical detail (high-pass along columns),
    diagonal detail.
    """
    lo_r, hi_r = _haar_step(np.asarray(x, dtype=np.float64), axis=0)
    ca, cv = _haar_step(lo_r, axis=1)
    ch, cd = _haar_step(hi_r, axis=1)
    return ca, ch, cv, cd


def wavelet_features(img: np.ndarray) -> np.ndarray:
    """14 statistics of each subband of a 2-level Haar decomposition (112).

    Level 1 runs on the image, level 2 on the level-1 approximation; each
    level contributes its (A, H, V, D) subbands in that order.
    """
    level1 = haar_dwt2(img.astype(np.float64))
    level2 = haar_dwt2(level1[0])
    parts = [compute_stats(band.ravel()) for band in (*level1, *level2)]
    return np.concatenate(parts)


def _lbp_offsets(radius: float, points: int = LBP_POINTS):
    """Circular sample offsets (dr, dc); near-integers snapped exactly."""
    offsets = []
    for k in range(points):
        theta = 2.0 * math.pi * k / points
        dr = -radius * math.sin(theta)
        dc = radius * math.cos(theta)
        dr = round(dr) if abs(dr - round(dr)) < 1e-9 else dr
        dc = round(dc) if abs(dc - round(dc)) < 1e-9 else dc
        offsets.append((dr, dc))
    return offsets


def _sampled_plane(img: np.ndarray, dr: float, dc: float, margin: int) -> np.ndarray:
    """Bilinearly sampled values at (r + dr, c + dc) for interior pixels."""
    h, w = img.shape
    fr, fc = math.floor(dr), math.floor(dc)
    tr, tc = dr - fr, dc - fc

    def block(ro: int, co: int):
        return img[margin + ro : h - margin + ro, margin + co : w - margin + co]

    if tr == 0 and tc == 0:
        return block(fr, fc)
    return (
        (1.0 - tr) * (1.0 - tc) * block(fr, fc)
        + (1.0 - tr) * tc * block(fr, fc + 1)
        + tr * (1.0 - tc) * block(fr + 1, fc)
        + tr * tc * block(fr + 1, fc + 1)
    )


def lbp_code_image(img: np.ndarray, radius: int, points: int = LBP_POINTS) -> np.ndarray:
    """Per-pixel LBP codes for interior pixels (border of ``radius`` excluded).

    Bit k of the code is set when the k-th circular sample (bilinearly
    interpolated off-grid) is >= the center pixel.
    """
    if img.ndim != 2:
        raise ValueError("lbp_code_image expects a 2-D image")
    h, w = img.shape
    if h <= 2 * radius or w <= 2 * radius:
        raise ValueError(f"image {img.shape} too small for LBP radius {radius}")
    values = img.astype(np.float64)
    center = values[radius : h - radius, radius : w - radius]
    codes = np.zeros(center.shape, dtype=np.int32)
    for k, (dr, dc) in enumerate(_lbp_offsets(float(radius), points)):
        sample = _sampled_plane(values, dr, dc, radius)
        codes |= (sample >= center).astype(np.int32) << k
    return codes


def lbp_features(img: np.ndarray) -> np.ndarray:
    """14 statistics of the LBP code image at each radius in (2, 3, 5, 7)."""
    parts = [
        compute_stats(lbp_code_image(img, radius).astype(np.float64).ravel())
        for radius in LBP_RADII
    ]
    return np.concatenate(parts)


_GROUP_EXTRACTORS = {
    "texture": texture_features,
    "glcm": glcm_features,
    "gldm": gldm_features,
    "fft": fft_features,
    "wavelet": wavelet_features,
    "lbp": lbp_features,
}


def extract_groups(img: np.ndarray, groups=GROUP_NAMES) -> np.ndarray:
    """Concatenated features for a subset of groups, in canonical order."""
    unknown = set(groups) - set(GROUP_NAMES)
    if unknown:
        raise ValueError(f"unknown feature groups: {sorted(unknown)}")
    selected = [name for name in GROUP_NAMES if name in set(groups)]
    if not selected:
        raise ValueError("no feature groups selected")
    return np.concatenate([_GROUP_EXTRACTORS[name](img) for name in selected])


def group_layout(groups=GROUP_NAMES):
    """(name, length) pairs for the selected groups in canonical order."""
    chosen = set(groups)
    return [(name, length) for name, length in FEATURE_GROUPS if name in chosen]


def extract_handcrafted(img: np.ndarray) -> np.ndarray:
    """The full 308-component vector: texture|glcm|gldm|fft|wavelet|lbp."""
    vec = extract_groups(img, GROUP_NAMES)
    assert vec.shape == (HANDCRAFTED_LENGTH,)
    return vec
