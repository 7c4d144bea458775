"""RFF1 feature files: the on-disk exchange format for feature matrices.

Layout (all integers little-endian)::

    bytes 0..3    magic "RFF1"
    bytes 4..7    u32 header length L
    bytes 8..8+L  UTF-8 JSON header
    ...           row-major little-endian float payload
    last 4 bytes  u32 CRC32 over everything before it

Header keys: version, n_samples, n_features, dtype ("f32"|"f64"), ids,
extractor, group_layout (nullable list of [name, length] pairs).
"""

from __future__ import annotations

import dataclasses
import json
import zlib
from pathlib import Path

import numpy as np

from .errors import FeatureFileError

MAGIC = b"RFF1"
VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


@dataclasses.dataclass
class FeatureFile:
    ids: list[str]
    matrix: np.ndarray
    extractor: str
    group_layout: list | None

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def row_for(self, sample_id: str) -> np.ndarray:
        try:
            return self.matrix[self.ids.index(sample_id)]
        except ValueError:
            raise KeyError(sample_id) from None


def write_rff1(path, ids, matrix, *, extractor: str = "", group_layout=None, dtype: str = "f32") -> None:
    """Write a feature matrix with aligned sample ids to ``path``."""
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    matrix = np.ascontiguousarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    ids = [str(i) for i in ids]
    if len(ids) != matrix.shape[0]:
        raise ValueError(f"{len(ids)} ids for {matrix.shape[0]} rows")
    if len(set(ids)) != len(ids):
        raise ValueError("sample ids must be unique")

    header = {
        "version": VERSION,
        "n_samples": matrix.shape[0],
        "n_features": matrix.shape[1],
        "dtype": dtype,
        "ids": ids,
        "extractor": extractor,
        "group_layout": [[str(n), int(w)] for n, w in group_layout] if group_layout else None,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = matrix.astype(_DTYPES[dtype], copy=False).tobytes(order="C")

    body = MAGIC + len(header_bytes).to_bytes(4, "little") + header_bytes + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + crc.to_bytes(4, "little"))


def read_rff1(path) -> FeatureFile:
    """Read and validate an RFF1 file."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FeatureFileError(f"{path}: file too short for RFF1")
    if raw[:4] != MAGIC:
        raise FeatureFileError(f"{path}: bad magic {raw[:4]!r}")
    stored_crc = int.from_bytes(raw[-4:], "little")
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise FeatureFileError(f"{path}: CRC mismatch, file is corrupt")

    header_len = int.from_bytes(raw[4:8], "little")
    header_end = 8 + header_len
    if header_end > len(raw) - 4:
        raise FeatureFileError(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(raw[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FeatureFileError(f"{path}: bad header: {exc}") from exc

    if header.get("version") != VERSION:
        raise FeatureFileError(f"{path}: unsupported RFF1 version {header.get('version')}")
    dtype = header.get("dtype")
    if dtype not in _DTYPES:
        raise FeatureFileError(f"{path}: unsupported dtype {dtype!r}")
    n, d = header.get("n_samples"), header.get("n_features")
    ids = header.get("ids")
    if not isinstance(n, int) or not isinstance(d, int) or not isinstance(ids, list):
        raise FeatureFileError(f"{path}: malformed header fields")
    if len(ids) != n:
        raise FeatureFileError(f"{path}: header declares {n} samples but lists {len(ids)} ids")

    payload = raw[header_end:-4]
    expected = n * d * _DTYPES[dtype].itemsize
    if len(payload) != expected:
        raise FeatureFileError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    matrix = np.frombuffer(payload, dtype=_DTYPES[dtype]).reshape(n, d).copy()
    layout = header.get("group_layout")
    return FeatureFile(
        ids=[str(i) for i in ids],
        matrix=matrix,
        extractor=str(header.get("extractor", "")),
        group_layout=[(str(g), int(w)) for g, w in layout] if layout else None,
    )
