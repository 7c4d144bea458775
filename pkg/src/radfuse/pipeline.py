"""Dataset ingestion, splitting, feature fusion, training, and prediction.

The training flow, in fitting order: extract handcrafted + raw deep blocks
for the training rows, fit kernel PCA on the raw deep block, fuse
[handcrafted | reduced deep], fit the standardizer, fit the SVM. Every
fit step sees training rows only; evaluation rows pass through the fitted
transforms.

Feature extraction aborts on the first failing sample (naming it) rather
than dropping rows, so the train/test accounting can never silently
drift.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import time
import zlib
from pathlib import Path

import numpy as np

from . import deepfeat as _deepfeat
from .classifier import (
    CLASSES,
    StandardizerModel,
    SvmModel,
    SvmTrainConfig,
    standardize_apply,
    standardize_fit,
    svm_decision,
    svm_fit,
)
from .deepfeat import KpcaModel, PrecomputedProvider, kpca_transform
from .errors import (
    ExtractionError,
    IngestError,
    ModelChecksumError,
    ModelFormatError,
    ModelVersionError,
)
from .featurefile import read_rff1
from .handcrafted import extract_groups, group_layout
from .preprocess import ClaheConfig, PreprocessConfig, preprocess_image

MODEL_FORMAT = "radfuse.model"
MODEL_VERSION = 1

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclasses.dataclass(frozen=True)
class DatasetRecord:
    id: str
    path: str
    label: str


@dataclasses.dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True


@dataclasses.dataclass
class FeatureTable:
    ids: list
    matrix: np.ndarray
    group_layout: list  # (name, width) pairs, fused column order


def _normalize_label(raw: str) -> str:
    label = raw.strip().lower()
    if label not in CLASSES:
        raise IngestError(f"unknown label {raw!r}; expected one of {CLASSES} (case-insensitive)")
    return label


def ingest(source) -> list:
    """Load a labeled dataset from a manifest CSV or a class-directory root.

    A directory source must contain covid/normal/pneumonia subdirectories
    (names case-insensitive); a file source must be a CSV with the exact
    header ``id,path,label``. Records come back sorted by id; duplicate
    ids, unknown labels, and missing files are rejected.
    """
    source = Path(source)
    if source.is_dir():
        records = _ingest_directory(source)
    elif source.is_file():
        records = _ingest_manifest(source)
    else:
        raise IngestError(f"dataset source not found: {source}")

    seen = {}
    for rec in records:
        if rec.id in seen:
            raise IngestError(f"duplicate sample id {rec.id!r}")
        seen[rec.id] = rec
        if not Path(rec.path).is_file():
            raise IngestError(f"sample {rec.id!r}: file not found: {rec.path}")
    return sorted(records, key=lambda r: r.id)


def _ingest_directory(root: Path) -> list:
    by_label = {}
    for child in root.iterdir():
        if child.is_dir() and child.name.lower() in CLASSES:
            by_label[child.name.lower()] = child
    if not by_label:
        raise IngestError(f"{root}: no covid/normal/pneumonia subdirectories found")
    records = []
    for label, folder in sorted(by_label.items()):
        for path in sorted(folder.iterdir()):
            if path.suffix.lower() in _IMAGE_SUFFIXES:
                records.append(DatasetRecord(id=f"{label}/{path.name}", path=str(path), label=label))
    if not records:
        raise IngestError(f"{root}: class directories contain no images")
    return records


def _ingest_manifest(path: Path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "path", "label"]:
            raise IngestError(f"{path}: manifest header must be exactly 'id,path,label', got {reader.fieldnames}")
        records = []
        for line_no, row in enumerate(reader, start=2):
            sample_id = (row["id"] or "").strip()
            rel = (row["path"] or "").strip()
            if not sample_id or not rel:
                raise IngestError(f"{path}:{line_no}: empty id or path")
            resolved = Path(rel)
            if not resolved.is_absolute():
                resolved = path.parent / resolved
            records.append(DatasetRecord(id=sample_id, path=str(resolved), label=_normalize_label(row["label"])))
    if not records:
        raise IngestError(f"{path}: manifest has no data rows")
    return records


def split(records, spec: SplitSpec = SplitSpec()):
    """Deterministic (seeded) train/test split, stratified by default.

    Per class, ``floor(train_fraction * n_class + 0.5)`` samples go to
    train; with the 1,143/2,000/2,000 composition at 0.8 this yields the
    4,114/1,029 partition. Outputs preserve dataset (id-sorted) order.
    """
    if not 0.0 < spec.train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {spec.train_fraction}")
    records = list(records)
    outside = {r.label for r in records} - set(CLASSES)
    if outside:
        raise ValueError(f"records carry labels outside the class set: {sorted(outside)}")
    rng = np.random.default_rng(spec.seed)

    if spec.stratified:
        train_idx = []
        for cls in CLASSES:
            cls_idx = [i for i, r in enumerate(records) if r.label == cls]
            if not cls_idx:
                continue
            if len(cls_idx) < 2:
                raise ValueError(f"class {cls!r} has {len(cls_idx)} sample(s); need >= 2 for a stratified split")
            n_train = int(np.floor(spec.train_fraction * len(cls_idx) + 0.5))
            order = rng.permutation(len(cls_idx))
            train_idx.extend(cls_idx[i] for i in order[:n_train])
    else:
        n_train = int(np.floor(spec.train_fraction * len(records) + 0.5))
        order = rng.permutation(len(records))
        train_idx = list(order[:n_train])

    chosen = set(train_idx)
    train = [r for i, r in enumerate(records) if i in chosen]
    test = [r for i, r in enumerate(records) if i not in chosen]
    return train, test


def preprocess_config_from(config: dict) -> PreprocessConfig:
    pp = config["preprocess"]
    clip = pp["clip_limit"]
    return PreprocessConfig(
        clahe=ClaheConfig(
            tile_grid=tuple(pp["tile_grid"]),
            clip_limit=None if clip is None else float(clip),
            bins=int(pp["bins"]),
        ),
        means_bgr=tuple(float(m) for m in pp["means_bgr"]),
    )


def _extract_worker(task):
    sample_id, path, groups, pp_cfg = task
    try:
        gray, _ = preprocess_image(path, pp_cfg)
        return extract_groups(gray, groups)
    except Exception as exc:
        raise ExtractionError(f"sample {sample_id!r}: {exc}", sample_id) from exc


def extract_handcrafted_matrix(records, config: dict, jobs: int = 1) -> np.ndarray:
    """Handcrafted feature rows for ``records`` in record order.

    ``jobs > 1`` fans extraction out over a process pool; ordering is
    preserved regardless of worker scheduling.
    """
    groups = tuple(config["features"]["groups"])
    pp_cfg = preprocess_config_from(config)
    tasks = [(r.id, r.path, groups, pp_cfg) for r in records]
    if jobs <= 1 or len(tasks) <= 1:
        rows = [_extract_worker(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_extract_worker, tasks, chunksize=4))
    return np.vstack(rows)


def _load_handcrafted_file(records, config: dict) -> np.ndarray:
    """Rows from a precomputed handcrafted RFF1 file, aligned to records.

    The file's group layout must match the configured group selection, so
    a stale or mismatched extraction cannot silently change the fused
    column meaning.
    """
    path = config["features"]["handcrafted_path"]
    expected = [(name, int(w)) for name, w in group_layout(config["features"]["groups"])]
    ff = read_rff1(path)
    if ff.group_layout is not None:
        stored = [(name, int(w)) for name, w in ff.group_layout]
        if stored != expected:
            raise ValueError(
                f"{path}: stores feature groups {stored}, but the config selects {expected}"
            )
    elif ff.n_features != sum(w for _, w in expected):
        raise ValueError(
            f"{path}: rows are {ff.n_features} wide, selected groups need "
            f"{sum(w for _, w in expected)}"
        )
    provider = PrecomputedProvider(path)
    return provider.features([r.id for r in records]).astype(np.float64)


def handcrafted_block(records, config: dict, jobs: int = 1) -> np.ndarray | None:
    if not config["features"]["groups"]:
        return None
    if config["features"].get("handcrafted_path"):
        return _load_handcrafted_file(records, config)
    return extract_handcrafted_matrix(records, config, jobs=jobs)


def deep_block(records, config: dict, provider) -> np.ndarray | None:
    """Raw (unreduced) deep-feature rows for the records, or None."""
    deep_cfg = config["features"]["deep"]
    if deep_cfg is None:
        return None
    if provider is None:
        raise ValueError("config enables deep features but no provider was supplied")
    if deep_cfg["backend"] == "precomputed":
        return _deepfeat.deep_features(provider, [r.id for r in records])
    pp_cfg = preprocess_config_from(config)
    tensors = [preprocess_image(r.path, pp_cfg)[1] for r in records]
    return _deepfeat.deep_features(provider, tensors)


def make_deep_provider(config: dict):
    deep_cfg = config["features"]["deep"]
    if deep_cfg is None:
        return None
    if deep_cfg["backend"] == "precomputed":
        return PrecomputedProvider(deep_cfg["feature_path"], deep_cfg.get("width"))
    from .deepfeat import OnnxProvider

    return OnnxProvider(deep_cfg["model_path"], deep_cfg.get("width"))


def fuse(handcrafted: np.ndarray | None, reduced_deep: np.ndarray | None, config: dict) -> FeatureTable:
    """Fused design matrix in fixed column order [handcrafted | deep]."""
    blocks, layout = [], []
    if handcrafted is not None:
        blocks.append(handcrafted)
        layout.extend(group_layout(config["features"]["groups"]))
    if reduced_deep is not None:
        blocks.append(reduced_deep)
        layout.append(("deep_kpca", reduced_deep.shape[1]))
    if not blocks:
        raise ValueError("no feature blocks enabled (empty groups and no deep config)")
    return FeatureTable(ids=[], matrix=np.hstack(blocks), group_layout=layout)


def build_feature_table(records, config: dict, provider=None, kpca_model: KpcaModel | None = None, jobs: int = 1) -> FeatureTable:
    """Extract and fuse features for ``records``.

    ``kpca_model`` is required when deep features are enabled (reduction
    is part of the fused table contract); handcrafted-only configurations
    need neither provider nor model.
    """
    hc = handcrafted_block(records, config, jobs=jobs)
    deep_raw = deep_block(records, config, provider)
    reduced = None
    if deep_raw is not None:
        if kpca_model is None:
            raise ValueError("deep features enabled: a fitted kpca model is required to fuse")
        reduced = kpca_transform(kpca_model, deep_raw)
    table = fuse(hc, reduced, config)
    table.ids = [r.id for r in records]
    return table


@dataclasses.dataclass
class PipelineModel:
    config: dict
    kpca: KpcaModel | None
    standardizer: StandardizerModel
    svm: SvmModel
    provenance: dict


def dataset_hash(records) -> str:
    """Order-independent digest of (id, label) pairs."""
    digest = hashlib.sha256()
    for rec in sorted(records, key=lambda r: r.id):
        digest.update(f"{rec.id},{rec.label}\n".encode("utf-8"))
    return digest.hexdigest()


def train_pipeline(train_records, config: dict, provider=None, jobs: int = 1):
    """Fit the full pipeline on training records only.

    Returns ``(model, report)``; the report carries diagnostics
    (timings, convergence flags, effective component count) and is the
    intended home for timestamps, keeping the model file byte-stable.
    """
    t0 = time.monotonic()
    labels = np.array([r.label for r in train_records])

    hc = handcrafted_block(train_records, config, jobs=jobs)
    deep_raw = deep_block(train_records, config, provider)

    kpca_model = None
    effective_k = None
    k_clamped = False
    if deep_raw is not None:
        requested_k = int(config["kpca"]["k"])
        kpca_model = _deepfeat.kpca_fit(
            deep_raw,
            k=requested_k,
            kernel=config["kpca"]["kernel"],
            gamma=config["kpca"]["gamma"],
        )
        effective_k = kpca_model.n_components
        k_clamped = effective_k < requested_k

    reduced = kpca_transform(kpca_model, deep_raw) if deep_raw is not None else None
    table = fuse(hc, reduced, config)

    standardizer = standardize_fit(table.matrix)
    x_std = standardize_apply(standardizer, table.matrix)
    svm_cfg = SvmTrainConfig(
        C=float(config["svm"]["C"]),
        tol=float(config["svm"]["tol"]),
        max_iter=int(config["svm"]["max_iter"]),
        seed=int(config["svm"]["seed"]),
    )
    svm_model = svm_fit(x_std, labels, svm_cfg)

    train_pred = np.array(
        [svm_model.classes[i] for i in np.argmax(svm_decision(svm_model, x_std), axis=1)]
    )
    model = PipelineModel(
        config=config,
        kpca=kpca_model,
        standardizer=standardizer,
        svm=svm_model,
        provenance={
            "dataset_hash": dataset_hash(train_records),
            "n_train": len(train_records),
            "svm_seed": svm_cfg.seed,
            "split_seed": config["split"]["seed"],
            "fused_width": int(table.matrix.shape[1]),
            "group_layout": [[n, int(w)] for n, w in table.group_layout],
        },
    )
    report = {
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "n_train": len(train_records),
        "fused_width": int(table.matrix.shape[1]),
        "effective_kpca_components": effective_k,
        "kpca_k_clamped": k_clamped,
        "svm_converged": list(model.svm.converged),
        "train_accuracy": float(np.mean(train_pred == labels)),
        "train_seconds": round(time.monotonic() - t0, 3),
    }
    return model, report


def features_for_records(model: PipelineModel, records, provider=None, jobs: int = 1) -> np.ndarray:
    """Standardized fused rows for dataset records (id-keyed path).

    Honors a precomputed handcrafted file exactly like training, so the
    record ids must be present there when one is configured.
    """
    config = model.config
    hc = handcrafted_block(records, config, jobs=jobs)
    deep_raw = deep_block(records, config, provider)
    reduced = kpca_transform(model.kpca, deep_raw) if deep_raw is not None else None
    table = fuse(hc, reduced, config)
    return standardize_apply(model.standardizer, table.matrix)


def features_for_images(model: PipelineModel, paths, provider=None, sample_ids=None, jobs: int = 1) -> np.ndarray:
    """Standardized fused rows for arbitrary image files.

    Handcrafted features are always computed from pixels here (the
    precomputed handcrafted file, if any, is a training shortcut and will
    not contain new images). The precomputed *deep* backend looks rows up
    by ``sample_ids``, defaulting to each file's stem.
    """
    config = dict(model.config)
    config["features"] = dict(model.config["features"], handcrafted_path=None)
    if sample_ids is None:
        sample_ids = [Path(p).stem for p in paths]
    records = [DatasetRecord(id=s, path=str(p), label=CLASSES[0]) for s, p in zip(sample_ids, paths)]
    hc = handcrafted_block(records, config, jobs=jobs)
    deep_raw = deep_block(records, config, provider)
    reduced = kpca_transform(model.kpca, deep_raw) if deep_raw is not None else None
    table = fuse(hc, reduced, config)
    return standardize_apply(model.standardizer, table.matrix)


def predict(model: PipelineModel, image_path, provider=None, sample_id=None):
    """(label, per-class score dict) for a single image file.

    ``sample_id`` keys the precomputed deep backend (defaults to the file
    stem). Extraction failures surface as their original error (decode,
    format, ...) rather than the batch wrapper.
    """
    try:
        x = features_for_images(
            model,
            [image_path],
            provider=provider,
            sample_ids=None if sample_id is None else [sample_id],
        )
    except ExtractionError as exc:
        if exc.__cause__ is not None and isinstance(exc.__cause__, Exception):
            raise exc.__cause__
        raise
    scores = svm_decision(model.svm, x)[0]
    label = model.svm.classes[int(np.argmax(scores))]
    return label, {cls: float(s) for cls, s in zip(model.svm.classes, scores)}


# --- model serialization ---------------------------------------------------


def _kpca_to_doc(m: KpcaModel | None):
    if m is None:
        return None
    doc = {
        "kernel": m.kernel,
        "n_components": m.n_components,
        "eigenvalues": m.eigenvalues.tolist(),
        "input_width": m.input_width,
        "gamma": m.gamma,
    }
    if m.kernel == "linear":
        doc["mean"] = m.mean.tolist()
        doc["projection"] = m.projection.tolist()
    else:
        doc["references"] = m.references.tolist()
        doc["alphas"] = m.alphas.tolist()
        doc["train_col_means"] = m.train_col_means.tolist()
        doc["train_grand_mean"] = m.train_grand_mean
    return doc


def _kpca_from_doc(doc):
    if doc is None:
        return None
    m = KpcaModel(
        kernel=doc["kernel"],
        n_components=int(doc["n_components"]),
        eigenvalues=np.array(doc["eigenvalues"], dtype=np.float64),
        input_width=int(doc["input_width"]),
        gamma=doc.get("gamma"),
    )
    if m.kernel == "linear":
        m.mean = np.array(doc["mean"], dtype=np.float64)
        m.projection = np.array(doc["projection"], dtype=np.float64)
    else:
        m.references = np.array(doc["references"], dtype=np.float64)
        m.alphas = np.array(doc["alphas"], dtype=np.float64)
        m.train_col_means = np.array(doc["train_col_means"], dtype=np.float64)
        m.train_grand_mean = float(doc["train_grand_mean"])
    return m


def _model_doc(model: PipelineModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config,
        "kpca": _kpca_to_doc(model.kpca),
        "standardizer": {
            "mean": model.standardizer.mean.tolist(),
            "scale": model.standardizer.scale.tolist(),
        },
        "svm": {
            "classes": list(model.svm.classes),
            "weights": model.svm.weights.tolist(),
            "biases": model.svm.biases.tolist(),
            "C": model.svm.C,
            "converged": list(model.svm.converged),
        },
        "provenance": model.provenance,
    }


def _canonical_bytes(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def save_model(model: PipelineModel, path) -> None:
    """Write the model as JSON; floats round-trip binary64 exactly.

    A CRC32 over the canonical document (checksum field excluded) guards
    against truncation and tampering.
    """
    doc = _model_doc(model)
    doc["checksum"] = f"crc32:{zlib.crc32(_canonical_bytes(doc)) & 0xFFFFFFFF:08x}"
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False))


def load_model(path) -> PipelineModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelVersionError(
            f"{path}: model schema version {doc.get('version')} unsupported (expected {MODEL_VERSION})"
        )
    stored = doc.pop("checksum", None)
    if stored != f"crc32:{zlib.crc32(_canonical_bytes(doc)) & 0xFFFFFFFF:08x}":
        raise ModelChecksumError(f"{path}: checksum mismatch; file corrupted or modified")

    svm_doc = doc["svm"]
    svm_model = SvmModel(
        classes=tuple(svm_doc["classes"]),
        weights=np.array(svm_doc["weights"], dtype=np.float64),
        biases=np.array(svm_doc["biases"], dtype=np.float64),
        C=float(svm_doc["C"]),
        converged=tuple(bool(c) for c in svm_doc["converged"]),
    )
    return PipelineModel(
        config=doc["config"],
        kpca=_kpca_from_doc(doc["kpca"]),
        standardizer=StandardizerModel(
            mean=np.array(doc["standardizer"]["mean"], dtype=np.float64),
            scale=np.array(doc["standardizer"]["scale"], dtype=np.float64),
        ),
        svm=svm_model,
        provenance=doc["provenance"],
    )
