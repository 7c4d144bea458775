"""Export tooling: frozen CNN backbones to ONNX, deep features to RFF1."""

from .backbones import BACKBONES, build_feature_extractor, flat_width, weights_checksum
from .export import ExportSpec, export_onnx
from .precompute import precompute_features

__version__ = "0.1.0"
