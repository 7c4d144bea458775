"""Frozen CNN feature extractors: everything up to the last pooling output.

Only the convolutional trunks are used (the dense classification heads
are dropped); weights are never updated here. For offline environments
``weights="random"`` builds the same architecture with seeded random
initialization, which preserves every shape contract.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn
from torchvision import models

# backbone -> (flattened feature width, output map shape)
BACKBONES = {
    "vgg16": 25088,  # 512 x 7 x 7
    "resnet50": 100352,  # 2048 x 7 x 7
}

_RANDOM_INIT_SEED = 20240224


def build_feature_extractor(backbone: str, weights: str = "imagenet") -> tuple[nn.Module, int]:
    """(frozen eval-mode module, flattened output width) for a backbone.

    ``weights``: "imagenet" downloads the pretrained weights via
    torchvision; "random" keeps the fresh initialization (seeded, so two
    builds are bit-identical).
    """
    if backbone not in BACKBONES:
        raise ValueError(f"unknown backbone {backbone!r}; expected one of {sorted(BACKBONES)}")
    if weights not in ("imagenet", "random"):
        raise ValueError(f"weights must be 'imagenet' or 'random', got {weights!r}")

    if weights == "random":
        torch.manual_seed(_RANDOM_INIT_SEED)

    if backbone == "vgg16":
        full = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1 if weights == "imagenet" else None)
        trunk = full.features
    else:
        full = models.resnet50(weights=models.ResNet50_Weights.IMAGENET1K_V1 if weights == "imagenet" else None)
        trunk = nn.Sequential(*list(full.children())[:-2])  # drop avgpool + fc

    trunk.eval()
    for p in trunk.parameters():
        p.requires_grad_(False)

    width = flat_width(trunk)
    expected = BACKBONES[backbone]
    if width != expected:
        raise RuntimeError(f"{backbone}: trunk flattens to {width}, expected {expected}")
    return trunk, width


def flat_width(module: nn.Module) -> int:
    """Flattened output size for a 1x3x224x224 input."""
    with torch.no_grad():
        out = module(torch.zeros(1, 3, 224, 224))
    return int(out.numel())


def weights_checksum(module: nn.Module) -> str:
    """SHA-256 over all parameters and buffers, in state-dict order."""
    digest = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
