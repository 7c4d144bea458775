"""Synthetic texture images and a stand-in deep-feature extractor.

The real clinical dataset and pretrained backbones cannot ship with the
package, so demos and the end-to-end tests run on three procedurally
generated texture classes (smoothed noise / stripes / blobs) mapped onto
the covid/normal/pneumonia label slots, with deep features supplied by a
seeded random-convolution extractor writing ordinary RFF1 files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

from .featurefile import write_rff1
from .preprocess import TARGET_SIZE

STANDIN_WIDTH = 4096


def _to_u8(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        return np.full(x.shape, 128, dtype=np.uint8)
    return np.clip(np.floor((x - lo) / (hi - lo) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _smooth(x: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur (reflect boundary) without scipy."""
    radius = max(1, int(3 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (t / sigma) ** 2)
    kernel /= kernel.sum()
    pad = np.pad(x, radius, mode="reflect")
    out = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, pad)
    out = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, out)
    return out


def make_smooth_noise(rng, size: int = TARGET_SIZE) -> np.ndarray:
    """Low-frequency blotchy noise field."""
    noise = rng.standard_normal((size, size))
    return _to_u8(_smooth(noise, sigma=rng.uniform(4.0, 8.0)))


def make_stripes(rng, size: int = TARGET_SIZE) -> np.ndarray:
    """Oriented sinusoidal stripes with mild additive noise."""
    theta = rng.uniform(0.0, np.pi)
    period = rng.uniform(8.0, 24.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    wave = np.sin(2.0 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + phase)
    wave += 0.15 * rng.standard_normal((size, size))
    return _to_u8(wave)


def make_blobs(rng, size: int = TARGET_SIZE) -> np.ndarray:
    """Random bright Gaussian bumps on a dark background."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    field = np.zeros((size, size))
    for _ in range(int(rng.integers(6, 14))):
        cy, cx = rng.uniform(0, size, size=2)
        s = rng.uniform(6.0, 18.0)
        amp = rng.uniform(0.5, 1.0)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * s * s))
    field += 0.05 * rng.standard_normal((size, size))
    return _to_u8(field)


_GENERATORS = {
    "covid": make_smooth_noise,
    "normal": make_stripes,
    "pneumonia": make_blobs,
}


def make_dataset(root, n_per_class: int = 20, seed: int = 0) -> Path:
    """Write a toy 3-class PNG dataset plus manifest; returns the manifest path."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    rows = []
    for label, gen in _GENERATORS.items():
        folder = root / label
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(n_per_class):
            img = gen(rng)
            name = f"{label}_{i:04d}.png"
            Image.fromarray(img).save(folder / name)
            rows.append((f"{label}/{name}", f"{label}/{name}", label))
    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "path", "label"])
        writer.writerows(sorted(rows))
    return manifest


def random_conv_features(gray_images, width: int = STANDIN_WIDTH, seed: int = 0) -> np.ndarray:
    """Deterministic random-convolution features (a frozen-CNN stand-in).

    16 seeded 9x9 filters, stride-4 valid convolution, ReLU, 16x16 average
    pooling -> 16*16*16 = 4096 values per image. Same seed, same rows.
    """
    if width != STANDIN_WIDTH:
        raise ValueError(f"random_conv_features is fixed at width {STANDIN_WIDTH}")
    rng = np.random.default_rng(seed)
    filters = rng.standard_normal((16, 9, 9))
    filters -= filters.mean(axis=(1, 2), keepdims=True)
    rows = []
    for img in gray_images:
        x = np.asarray(img, dtype=np.float64) / 255.0
        windows = np.lib.stride_tricks.sliding_window_view(x, (9, 9))[::4, ::4]
        response = np.maximum(np.tensordot(windows, filters, axes=([2, 3], [1, 2])), 0.0)
        h = (response.shape[0] // 16) * 16
        w = (response.shape[1] // 16) * 16
        pooled = response[:h, :w].reshape(16, h // 16, 16, w // 16, 16).mean(axis=(1, 3))
        rows.append(pooled.reshape(-1).astype(np.float32))
    return np.vstack(rows)


def write_standin_deep_features(manifest, out_path, seed: int = 0, preprocess_cfg=None) -> None:
    """Precompute stand-in deep features for every manifest row into RFF1."""
    from .pipeline import ingest
    from .preprocess import PreprocessConfig, preprocess_image

    records = ingest(manifest)
    cfg = preprocess_cfg or PreprocessConfig()
    grays = [preprocess_image(r.path, cfg)[0] for r in records]
    matrix = random_conv_features(grays, seed=seed)
    write_rff1(out_path, [r.id for r in records], matrix, extractor=f"random_conv(seed={seed})")
