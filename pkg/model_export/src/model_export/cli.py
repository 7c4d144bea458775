"""Command-line interface: export-onnx and precompute."""

from __future__ import annotations

import argparse
import logging
import sys

from radfuse.config import load_config

from .backbones import BACKBONES
from .export import ExportSpec, export_onnx
from .precompute import precompute_features

log = logging.getLogger("radfuse-export")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radfuse-export",
        description="Produce ONNX graphs and precomputed deep-feature files for radfuse.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_onnx = sub.add_parser("export-onnx", help="export a frozen backbone to ONNX + metadata")
    p_onnx.add_argument("--backbone", choices=sorted(BACKBONES), required=True)
    p_onnx.add_argument("--out", required=True)
    p_onnx.add_argument("--weights", choices=["imagenet", "random"], default="imagenet")
    p_onnx.add_argument("--opset", type=int, default=13)

    p_pre = sub.add_parser("precompute", help="write deep features for a manifest into RFF1")
    p_pre.add_argument("--manifest", required=True)
    p_pre.add_argument("--backbone", choices=sorted(BACKBONES), required=True)
    p_pre.add_argument("--out", required=True)
    p_pre.add_argument("--weights", choices=["imagenet", "random"], default="imagenet")
    p_pre.add_argument("--batch", type=int, default=8)
    p_pre.add_argument("--config", default=None, help="radfuse run config (shared preprocessing)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        if args.command == "export-onnx":
            onnx_path, meta_path = export_onnx(
                ExportSpec(backbone=args.backbone, out_path=args.out, weights=args.weights, opset=args.opset)
            )
            log.info("wrote %s and %s", onnx_path, meta_path)
        else:
            run_config = load_config(args.config) if args.config else None
            rows = precompute_features(
                args.manifest,
                args.backbone,
                args.out,
                weights=args.weights,
                batch_size=args.batch,
                run_config=run_config,
            )
            log.info("wrote %s (%d x %d)", args.out, rows.shape[0], rows.shape[1])
        return 0
    except Exception as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
