import pytest
import torch

from model_export.backbones import BACKBONES, build_feature_extractor, flat_width, weights_checksum


def test_vgg16_width_25088():
    trunk, width = build_feature_extractor("vgg16", weights="random")
    assert width == 25088 == BACKBONES["vgg16"]
    out = trunk(torch.zeros(2, 3, 224, 224))
    assert out.shape == (2, 512, 7, 7)


def test_resnet50_width_100352():
    trunk, width = build_feature_extractor("resnet50", weights="random")
    assert width == 100352 == BACKBONES["resnet50"]
    out = trunk(torch.zeros(1, 3, 224, 224))
    assert out.shape == (1, 2048, 7, 7)


def test_vgg16_outputs_nonnegative():
    # trunk ends with ReLU -> MaxPool, so features are >= 0 for any input
    trunk, _ = build_feature_extractor("vgg16", weights="random")
    with torch.no_grad():
        out = trunk(torch.randn(2, 3, 224, 224) * 100.0)
    assert float(out.min()) >= 0.0


def test_weights_frozen_eval_mode():
    trunk, _ = build_feature_extractor("vgg16", weights="random")
    assert not trunk.training
    assert all(not p.requires_grad for p in trunk.parameters())


def test_random_weights_reproducible():
    a, _ = build_feature_extractor("resnet50", weights="random")
    b, _ = build_feature_extractor("resnet50", weights="random")
    assert weights_checksum(a) == weights_checksum(b)


def test_unknown_backbone_rejected():
    with pytest.raises(ValueError):
        build_feature_extractor("alexnet", weights="random")
    with pytest.raises(ValueError):
        build_feature_extractor("vgg16", weights="xavier")


def test_flat_width_helper():
    trunk, width = build_feature_extractor("vgg16", weights="random")
    assert flat_width(trunk) == width
