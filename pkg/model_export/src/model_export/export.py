"""ONNX export of the frozen feature extractors.

The exported graph takes a float32 "input" of shape (batch, 3, 224, 224)
and returns the pooled feature map. A sidecar ``<model>.meta.json``
records the input layout and the centering convention so the consuming
side feeds tensors exactly the way they were produced during
precomputation (same config, same constants).
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import torch

from radfuse.preprocess import IMAGENET_MEANS_BGR

from .backbones import BACKBONES, build_feature_extractor, weights_checksum


@dataclasses.dataclass(frozen=True)
class ExportSpec:
    backbone: str  # vgg16 | resnet50
    out_path: str
    weights: str = "imagenet"
    opset: int = 13
    means_bgr: tuple = IMAGENET_MEANS_BGR


def export_onnx(spec: ExportSpec) -> tuple[Path, Path]:
    """Write the ONNX graph and its metadata sidecar; returns both paths.

    The flattened output width is verified by a real forward pass before
    anything is written; a mismatch aborts. Requires the ``onnx`` package
    (torch serializes through it).
    """
    try:
        import onnx  # noqa: F401 -- torch.onnx serializes through it
    except ImportError as exc:
        raise RuntimeError(
            "ONNX export needs the 'onnx' package (pip install radfuse-model-export[onnx])"
        ) from exc

    trunk, width = build_feature_extractor(spec.backbone, spec.weights)
    expected = BACKBONES[spec.backbone]
    if width != expected:
        raise RuntimeError(f"{spec.backbone}: output flattens to {width}, expected {expected}")

    out_path = Path(spec.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    dummy = torch.zeros(1, 3, 224, 224)
    torch.onnx.export(
        trunk,
        (dummy,),
        str(out_path),
        input_names=["input"],
        output_names=["features"],
        opset_version=spec.opset,
        dynamic_axes={"input": {0: "batch"}, "features": {0: "batch"}},
        dynamo=False,
    )

    meta = {
        "backbone": spec.backbone,
        "weights": spec.weights,
        "flat_width": width,
        "input_layout": "NCHW",
        "channel_order": "BGR",
        "means_bgr": list(spec.means_bgr),
        "scale": 1.0,
        "opset": spec.opset,
        "weights_sha256": weights_checksum(trunk),
    }
    meta_path = Path(str(out_path) + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return out_path, meta_path
