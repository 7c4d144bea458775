"""Image loading and preprocessing.

Every image is reduced to a single 224x224 8-bit grayscale plane (the input
of all handcrafted extractors) plus a zero-centered 3-channel tensor (the
input of the deep backbones).  The chain is::

    load -> grayscale (Rec.601) -> bilinear resize to 224x224 -> CLAHE
         -> (gray, gray duplicated to B,G,R minus channel means)

All steps are pure functions; the same file always produces bitwise
identical outputs.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageDecodeError, ImageFormatError

TARGET_SIZE = 224

# Channel means subtracted from the duplicated grayscale values, in B,G,R
# order ("zero-centered ... without scaling" convention of Caffe-lineage
# ImageNet models). Overridable via PreprocessConfig.
IMAGENET_MEANS_BGR = (103.939, 116.779, 123.68)


@dataclasses.dataclass(frozen=True)
class ClaheConfig:
    """Contrast-limited adaptive histogram equalization parameters.

    ``clip_limit`` is expressed as a multiple of the uniform histogram
    level (tile_pixels / bins); ``None`` disables clipping entirely.
    """

    tile_grid: tuple[int, int] = (8, 8)
    clip_limit: float | None = 2.0
    bins: int = 256

    def validate(self) -> None:
        gr, gc = self.tile_grid
        if gr < 1 or gc < 1:
            raise ValueError(f"clahe tile grid must be >= 1x1, got {self.tile_grid}")
        if self.clip_limit is not None and not self.clip_limit > 0:
            raise ValueError(f"clahe clip limit must be > 0, got {self.clip_limit}")
        if self.bins < 2 or self.bins > 256:
            raise ValueError(f"clahe bins must be in [2, 256], got {self.bins}")


@dataclasses.dataclass(frozen=True)
class PreprocessConfig:
    clahe: ClaheConfig = ClaheConfig()
    means_bgr: tuple[float, float, float] = IMAGENET_MEANS_BGR
    size: int = TARGET_SIZE


def _round_u8(x: np.ndarray) -> np.ndarray:
    """Round half-up and clamp into [0, 255]."""
    return np.clip(np.floor(x + 0.5), 0.0, 255.0).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Decode a PNG/JPEG file into a (H, W) or (H, W, 3) uint8 array.

    An alpha channel is dropped; palette images are expanded; 16-bit
    grayscale is rescaled to 8 bits. Other channel layouts raise
    ImageFormatError, undecodable data raises ImageDecodeError.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode == "P":
                img = img.convert("RGB")
            arr = np.asarray(img)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageDecodeError(f"cannot decode {path}: {exc}") from exc

    if arr.ndim == 2:
        if arr.dtype == np.uint8:
            return arr
        if arr.dtype == np.uint16:
            # 65535/257 == 255 exactly
            return _round_u8(arr.astype(np.float64) / 257.0)
        if arr.dtype == np.int32:  # PIL mode "I"
            return _round_u8(arr.astype(np.float64) / 257.0)
        raise ImageFormatError(f"{path}: unsupported grayscale depth {arr.dtype}")
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            arr = arr[:, :, :3]
        if arr.shape[2] == 3:
            if arr.dtype != np.uint8:
                raise ImageFormatError(f"{path}: unsupported color depth {arr.dtype}")
            return arr
        raise ImageFormatError(f"{path}: unsupported channel count {arr.shape[2]}")
    raise ImageFormatError(f"{path}: unsupported array rank {arr.ndim}")


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma conversion: round(0.299 R + 0.587 G + 0.114 B)."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"to_grayscale expects (H, W, 3), got {img.shape}")
    rgb = img.astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return _round_u8(y)


def _axis_weights(n_src: int, n_dst: int):
    """Half-pixel-centered source indices and weights for one axis."""
    dst = np.arange(n_dst, dtype=np.float64)
    src = (dst + 0.5) * (n_src / n_dst) - 0.5
    src = np.clip(src, 0.0, n_src - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    t = src - i0
    return i0, i1, t


def resize_bilinear(img: np.ndarray, width: int = TARGET_SIZE, height: int = TARGET_SIZE) -> np.ndarray:
    """Bilinear resize of a single-channel image with half-pixel centers.

    Output values are rounded to the nearest integer in [0, 255]. Resizing
    to the source size is an exact identity.
    """
    if img.ndim != 2:
        raise ValueError(f"resize_bilinear expects a 2-D image, got shape {img.shape}")
    h_src, w_src = img.shape
    if h_src < 1 or w_src < 1 or width < 1 or height < 1:
        raise ValueError("resize_bilinear: zero-sized image or target")
    if (h_src, w_src) == (height, width):
        return img.astype(np.uint8, copy=True)

    src = img.astype(np.float64)
    r0, r1, tr = _axis_weights(h_src, height)
    c0, c1, tc = _axis_weights(w_src, width)
    rows = src[r0, :] * (1.0 - tr)[:, None] + src[r1, :] * tr[:, None]
    out = rows[:, c0] * (1.0 - tc)[None, :] + rows[:, c1] * tc[None, :]
    return _round_u8(out)


def _tile_edges(extent: int, n_tiles: int) -> np.ndarray:
    """Tile boundaries: equal floor-sized tiles, remainder absorbed by the last."""
    if n_tiles > extent:
        raise ValueError(f"clahe tile grid {n_tiles} exceeds image extent {extent}")
    base = extent // n_tiles
    edges = np.arange(n_tiles + 1, dtype=np.intp) * base
    edges[-1] = extent
    return edges


def _interp_coords(edges: np.ndarray, extent: int):
    """Per-pixel tile pair (lo, hi) and blend weight for one axis.

    Pixels interpolate between the mappings of the two nearest tile centers
    and clamp to the border tile outside the span of centers.
    """
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    pos = np.arange(extent, dtype=np.float64)
    hi = np.searchsorted(centers, pos, side="left")
    lo = hi - 1
    lo = np.clip(lo, 0, len(centers) - 1)
    hi = np.clip(hi, 0, len(centers) - 1)
    denom = centers[hi] - centers[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(denom > 0, (pos - centers[lo]) / np.where(denom > 0, denom, 1.0), 0.0)
    return lo.astype(np.intp), hi.astype(np.intp), w


def clahe(img: np.ndarray, cfg: ClaheConfig = ClaheConfig()) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    Per-tile histograms are clipped at ``clip_limit * tile_pixels / bins``
    with the excess redistributed uniformly over all bins; each tile's
    mapping is the clipped CDF scaled to [0, 255], and per-pixel outputs
    blend the four neighboring tile mappings bilinearly.

    With a 1x1 tile grid and clipping disabled this reduces exactly to
    plain global histogram equalization.
    """
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("clahe expects a 2-D uint8 image")
    cfg.validate()
    h, w = img.shape
    gr, gc = cfg.tile_grid
    bins = cfg.bins

    bin_idx = ((img.astype(np.intp) * bins) >> 8) if bins != 256 else img.astype(np.intp)

    r_edges = _tile_edges(h, gr)
    c_edges = _tile_edges(w, gc)

    # Float-valued mapping (bin -> output intensity) per tile.
    maps = np.empty((gr, gc, bins), dtype=np.float64)
    for i in range(gr):
        for j in range(gc):
            tile = bin_idx[r_edges[i] : r_edges[i + 1], c_edges[j] : c_edges[j + 1]]
            n_pix = tile.size
            hist = np.bincount(tile.ravel(), minlength=bins).astype(np.float64)
            if cfg.clip_limit is not None:
                limit = cfg.clip_limit * n_pix / bins
                excess = np.sum(np.maximum(hist - limit, 0.0))
                hist = np.minimum(hist, limit) + excess / bins
            cdf = np.cumsum(hist) / n_pix
            maps[i, j] = 255.0 * cdf

    r_lo, r_hi, wr = _interp_coords(r_edges, h)
    c_lo, c_hi, wc = _interp_coords(c_edges, w)

    flat = maps.reshape(gr * gc, bins)
    wr_col = wr[:, None]
    wc_row = wc[None, :]

    def lookup(rows, cols):
        return flat[(rows[:, None] * gc + cols[None, :]), bin_idx]

    out = (
        (1.0 - wr_col) * (1.0 - wc_row) * lookup(r_lo, c_lo)
        + wr_col * (1.0 - wc_row) * lookup(r_hi, c_lo)
        + (1.0 - wr_col) * wc_row * lookup(r_lo, c_hi)
        + wr_col * wc_row * lookup(r_hi, c_hi)
    )
    return _round_u8(out)


def global_hist_equalize(img: np.ndarray) -> np.ndarray:
    """Plain global histogram equalization (map each value to 255*CDF)."""
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("global_hist_equalize expects a 2-D uint8 image")
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    cdf = np.cumsum(hist) / img.size
    return _round_u8(255.0 * cdf)[img]


def to_model_input(gray: np.ndarray, means_bgr=IMAGENET_MEANS_BGR) -> np.ndarray:
    """Duplicate the grayscale plane into B,G,R channels and subtract the means.

    No scaling is applied; the result is float64 of shape (H, W, 3) with
    channel c equal to ``gray - means_bgr[c]``.
    """
    if gray.ndim != 2:
        raise ValueError(f"to_model_input expects a 2-D image, got shape {gray.shape}")
    if len(means_bgr) != 3:
        raise ValueError("means_bgr must have exactly 3 entries")
    g = gray.astype(np.float64)
    return np.stack([g - float(m) for m in means_bgr], axis=-1)


def preprocess_image(path, cfg: PreprocessConfig = PreprocessConfig()):
    """Full preprocessing chain for one file.

    Returns ``(gray, centered)`` where ``gray`` is the 224x224 uint8 plane
    and ``centered`` the (224, 224, 3) float64 B,G,R tensor.
    """
    raw = load_image(path)
    if raw.ndim == 3:
        raw = to_grayscale(raw)
    gray = resize_bilinear(raw, cfg.size, cfg.size)
    gray = clahe(gray, cfg.clahe)
    return gray, to_model_input(gray, cfg.means_bgr)
