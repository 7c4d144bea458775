"""Preprocessing walkthrough: decode -> grayscale -> resize -> CLAHE -> centering.

Generates a synthetic low-contrast "scan", runs the full preprocessing
chain, and saves a side-by-side PNG so the CLAHE effect is visible.

Run from the repository root:  python3 demos/01_preprocessing.py
"""

from pathlib import Path

import numpy as np
from PIL import Image

from radfuse.preprocess import (
    ClaheConfig,
    PreprocessConfig,
    clahe,
    preprocess_image,
    resize_bilinear,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# A washed-out synthetic chest-ish image: soft vertical gradient plus two
# bright lobes, squeezed into a narrow intensity band.
rng = np.random.default_rng(0)
yy, xx = np.mgrid[0:320, 0:280].astype(float)
lobes = 25 * np.exp(-((yy - 170) ** 2 + (xx - 90) ** 2) / 4000.0)
lobes += 25 * np.exp(-((yy - 170) ** 2 + (xx - 190) ** 2) / 4000.0)
base = 100 + 0.08 * yy + lobes + 2.0 * rng.standard_normal(yy.shape)
washed = np.clip(base, 0, 255).astype(np.uint8)
print(f"synthetic scan: {washed.shape}, intensity range [{washed.min()}, {washed.max()}]")

src_path = OUT / "synthetic_scan.png"
Image.fromarray(washed).save(src_path)

# Step by step: resize, then contrast-limited equalization.
resized = resize_bilinear(washed, 224, 224)
print(f"resized: {resized.shape}")

equalized = clahe(resized, ClaheConfig(tile_grid=(8, 8), clip_limit=2.0))
print(
    f"after CLAHE: range [{equalized.min()}, {equalized.max()}] "
    f"(support widened from {resized.max() - resized.min()} to {equalized.max() - equalized.min()})"
)

# Or the one-call version used by the pipeline, which also builds the
# centered 3-channel tensor for the CNN backbones.
gray, centered = preprocess_image(src_path, PreprocessConfig())
assert np.array_equal(gray, equalized)
print(f"centered tensor: {centered.shape}, B channel range "
      f"[{centered[:, :, 0].min():.1f}, {centered[:, :, 0].max():.1f}]")

side_by_side = np.hstack([resized, np.full((224, 4), 255, np.uint8), equalized])
Image.fromarray(side_by_side).save(OUT / "clahe_before_after.png")
print(f"wrote {OUT / 'clahe_before_after.png'}")
