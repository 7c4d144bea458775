"""Batch precomputation of deep features into RFF1 files.

Preprocessing runs through radfuse itself (same code, same shared
config), so the rows written here are exactly what the pipeline's ONNX
provider would compute for the same images, up to inference-engine
numeric drift.
"""

from __future__ import annotations

import numpy as np
import torch

from radfuse.errors import ExtractionError
from radfuse.featurefile import write_rff1
from radfuse.pipeline import ingest, preprocess_config_from
from radfuse.preprocess import PreprocessConfig, preprocess_image

from .backbones import build_feature_extractor


def precompute_features(
    manifest,
    backbone: str,
    out_path,
    weights: str = "imagenet",
    batch_size: int = 8,
    preprocess_cfg: PreprocessConfig | None = None,
    run_config: dict | None = None,
) -> np.ndarray:
    """Extract deep features for every manifest row and write RFF1.

    ``run_config`` (a validated radfuse run config) supplies the
    preprocessing parameters when given; otherwise ``preprocess_cfg`` or
    the package defaults apply. Any per-sample failure aborts, naming the
    sample. Returns the written matrix (float32).
    """
    if run_config is not None:
        preprocess_cfg = preprocess_config_from(run_config)
    cfg = preprocess_cfg or PreprocessConfig()
    records = ingest(manifest)
    trunk, width = build_feature_extractor(backbone, weights)

    rows = np.empty((len(records), width), dtype=np.float32)
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            tensors = []
            for rec in chunk:
                try:
                    _, centered = preprocess_image(rec.path, cfg)
                except Exception as exc:
                    raise ExtractionError(f"sample {rec.id!r}: {exc}", rec.id) from exc
                tensors.append(centered.transpose(2, 0, 1))  # HWC (B,G,R) -> CHW
            batch = torch.from_numpy(np.stack(tensors)).float()
            out = trunk(batch)
            rows[start : start + len(chunk)] = out.reshape(len(chunk), -1).numpy()

    write_rff1(
        out_path,
        [r.id for r in records],
        rows,
        extractor=f"{backbone}({weights})",
    )
    return rows
