"""Command-line surface: extract, train, eval, predict.

Conventions: machine-readable output on stdout, human logs on stderr.
Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal error.
All randomness flows from seeds in the run config.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .classifier import svm_decision
from .config import load_config, validate_config
from .errors import ConfigError, RadfuseError
from .evalmetrics import confusion_heatmap_png, confusion_to_csv, evaluate
from .featurefile import write_rff1
from .handcrafted import GROUP_NAMES, group_layout

log = logging.getLogger("radfuse")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _default_jobs() -> int:
    raw = os.environ.get("RADFUSE_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parse_groups(raw: str):
    if raw.strip().lower() == "all":
        return list(GROUP_NAMES)
    names = [g.strip() for g in raw.split(",") if g.strip()]
    bad = [g for g in names if g not in GROUP_NAMES]
    if bad:
        raise ConfigError(f"unknown feature groups {bad}; valid: {', '.join(GROUP_NAMES)}")
    if not names:
        raise ConfigError("--groups selected no feature groups")
    return names


def _load_cfg(path_or_none) -> dict:
    if path_or_none:
        return load_config(path_or_none)
    return validate_config({})


def _require_manifest(path) -> str:
    """A manifest argument that points at nothing is a config-level mistake."""
    if not path or not Path(path).exists():
        raise ConfigError(f"manifest not found: {path}")
    return str(path)


def cmd_extract(args) -> int:
    cfg = _load_cfg(args.config)
    cfg["features"]["groups"] = _parse_groups(args.groups)
    records = pl.ingest(_require_manifest(args.manifest))
    log.info("extracting %d features for %d samples (jobs=%d)",
             sum(w for _, w in group_layout(cfg["features"]["groups"])), len(records), args.jobs)
    matrix = pl.extract_handcrafted_matrix(records, cfg, jobs=args.jobs)
    write_rff1(
        args.out,
        [r.id for r in records],
        matrix,
        extractor="handcrafted",
        group_layout=group_layout(cfg["features"]["groups"]),
        dtype="f64",
    )
    log.info("wrote %s (%d x %d)", args.out, matrix.shape[0], matrix.shape[1])

    if args.deep_backend:
        if args.deep_backend != "onnx":
            raise ConfigError("cmd extract only computes deep features with --deep-backend onnx")
        if not args.deep_model or not args.deep_out:
            raise ConfigError("--deep-backend onnx requires --deep-model and --deep-out")
        cfg["features"]["deep"] = {
            "backend": "onnx",
            "model_path": args.deep_model,
            "feature_path": None,
            "width": args.deep_width,
        }
        provider = pl.make_deep_provider(cfg)
        deep = pl.deep_block(records, cfg, provider)
        write_rff1(args.deep_out, [r.id for r in records], deep, extractor=f"onnx:{args.deep_model}")
        log.info("wrote %s (%d x %d)", args.deep_out, deep.shape[0], deep.shape[1])
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    manifest = args.manifest or cfg["paths"].get("manifest")
    model_out = args.model_out or cfg["paths"].get("model_out")
    if not manifest or not model_out:
        raise ConfigError("training needs a manifest and a model output path (config paths.* or flags)")

    records = pl.ingest(_require_manifest(manifest))
    spec = pl.SplitSpec(
        train_fraction=cfg["split"]["train_fraction"],
        seed=cfg["split"]["seed"],
        stratified=cfg["split"]["stratified"],
    )
    train_records, test_records = pl.split(records, spec)
    log.info("split: %d train / %d test", len(train_records), len(test_records))

    provider = pl.make_deep_provider(cfg)
    model, report = pl.train_pipeline(train_records, cfg, provider=provider, jobs=args.jobs)
    if report["kpca_k_clamped"]:
        log.warning(
            "kpca components clamped to %d (requested %d)",
            report["effective_kpca_components"], cfg["kpca"]["k"],
        )
    if not all(report["svm_converged"]):
        log.warning("svm machines not fully converged: %s", report["svm_converged"])

    pl.save_model(model, model_out)
    report["model_path"] = str(model_out)
    report["n_test_heldout"] = len(test_records)
    report_out = args.report_out or cfg["paths"].get("report_out")
    if report_out:
        Path(report_out).write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, sort_keys=True))
    log.info("model written to %s", model_out)
    return EXIT_OK


def _eval_records(args, cfg_of_model) -> list:
    records = pl.ingest(_require_manifest(args.manifest))
    if args.use_split in ("train", "test"):
        split_cfg = cfg_of_model["split"]
        spec = pl.SplitSpec(
            train_fraction=split_cfg["train_fraction"],
            seed=split_cfg["seed"],
            stratified=split_cfg["stratified"],
        )
        train_records, test_records = pl.split(records, spec)
        records = train_records if args.use_split == "train" else test_records
    return records


def cmd_eval(args) -> int:
    model = pl.load_model(args.model)
    records = _eval_records(args, model.config)
    if not records:
        raise ConfigError("evaluation set is empty")
    log.info("evaluating %d samples", len(records))
    provider = pl.make_deep_provider(model.config)
    x = pl.features_for_records(model, records, provider=provider, jobs=args.jobs)
    scores = svm_decision(model.svm, x)
    y_pred = [model.svm.classes[i] for i in np.argmax(scores, axis=1)]
    y_true = [r.label for r in records]
    report = evaluate(y_true, y_pred, classes=model.svm.classes)

    doc = report.to_dict()
    doc["model_path"] = str(args.model)
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(json.dumps(doc, sort_keys=True))
    print(report.to_table(), file=sys.stderr)
    if args.csv:
        Path(args.csv).write_text(confusion_to_csv(report.confusion, report.classes))
    if args.png:
        try:
            confusion_heatmap_png(report.confusion, args.png, report.classes)
        except ImportError as exc:
            raise ConfigError("--png needs matplotlib (pip install radfuse[plot])") from exc
    return EXIT_OK


def cmd_predict(args) -> int:
    model = pl.load_model(args.model)
    provider = pl.make_deep_provider(model.config)
    sample_ids = args.ids or [None] * len(args.images)
    if len(sample_ids) != len(args.images):
        raise ConfigError(f"{len(sample_ids)} --id values for {len(args.images)} images")
    failures = 0
    rows = []
    for image, sample_id in zip(args.images, sample_ids):
        try:
            label, scores = pl.predict(model, image, provider=provider, sample_id=sample_id)
            rows.append({"path": str(image), "label": label, "scores": scores})
        except (RadfuseError, ValueError, FileNotFoundError) as exc:
            failures += 1
            rows.append({"path": str(image), "error": f"{type(exc).__name__}: {exc}"})

    if args.format == "jsonl":
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    else:
        classes = list(model.svm.classes)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["path", "label", *classes, "error"])
        for row in rows:
            scores = row.get("scores", {})
            writer.writerow(
                [row["path"], row.get("label", ""), *(scores.get(c, "") for c in classes), row.get("error", "")]
            )
        sys.stdout.write(buf.getvalue())
    return EXIT_DATA if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radfuse",
        description="Chest X-ray classification: handcrafted + reduced deep features into a linear SVM.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="compute handcrafted (and optionally deep) features to RFF1")
    p_extract.add_argument("--manifest", required=True)
    p_extract.add_argument("--out", required=True, help="output RFF1 for handcrafted features")
    p_extract.add_argument("--groups", default="all", help="comma list of groups or 'all'")
    p_extract.add_argument("--config", default=None, help="run config JSON (preprocess settings)")
    p_extract.add_argument("--deep-backend", choices=["onnx"], default=None)
    p_extract.add_argument("--deep-model", default=None, help="ONNX model path")
    p_extract.add_argument("--deep-width", type=int, default=None)
    p_extract.add_argument("--deep-out", default=None, help="output RFF1 for deep features")
    p_extract.add_argument("--jobs", type=int, default=_default_jobs())
    p_extract.set_defaults(func=cmd_extract)

    p_train = sub.add_parser("train", help="train the fused pipeline from a run config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--manifest", default=None, help="override config paths.manifest")
    p_train.add_argument("--model-out", default=None, help="override config paths.model_out")
    p_train.add_argument("--report-out", default=None, help="override config paths.report_out")
    p_train.add_argument("--jobs", type=int, default=_default_jobs())
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a trained model on a manifest")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument(
        "--use-split",
        choices=["all", "train", "test"],
        default="all",
        help="evaluate on the whole manifest or re-derive the model's split",
    )
    p_eval.add_argument("--out", default=None, help="write the JSON report here as well")
    p_eval.add_argument("--csv", default=None, help="write the confusion matrix as CSV")
    p_eval.add_argument("--png", default=None, help="render the confusion matrix heatmap (needs matplotlib)")
    p_eval.add_argument("--jobs", type=int, default=_default_jobs())
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="classify image files")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p_pred.add_argument(
        "--id",
        action="append",
        dest="ids",
        default=None,
        help="sample id for the precomputed deep backend; repeat once per image (default: file stem)",
    )
    p_pred.add_argument("images", nargs="+")
    p_pred.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (RadfuseError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover -- defensive
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
