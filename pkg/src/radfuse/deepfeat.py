"""Deep-feature providers and kernel PCA reduction.

Deep features come from a frozen CNN backbone through one of two backends:
an ONNX graph executed by onnxruntime, or a precomputed RFF1 file keyed by
sample id. Either way the pipeline only ever sees feature rows, keeping
this package free of any training framework.

The rows (25,088 wide for VGG16-style backbones, 100,352 for
ResNet50-style) are reduced to at most 1,000 components by kernel PCA on
the double-centered training Gram matrix.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError, ProviderError
from .featurefile import read_rff1

VGG16_WIDTH = 25088
RESNET50_WIDTH = 100352
DEFAULT_COMPONENTS = 1000

# Eigenvalues below this fraction of the largest are numerical noise from
# the centering and are discarded.
EIG_TOL = 1e-10


class PrecomputedProvider:
    """Serves rows of a precomputed RFF1 feature file, keyed by sample id."""

    def __init__(self, path, expected_width: int | None = None):
        ff = read_rff1(path)
        if expected_width is not None and ff.n_features != expected_width:
            raise ProviderError(
                f"{path}: file rows are {ff.n_features} wide, expected {expected_width}"
            )
        self.path = str(path)
        self.width = ff.n_features
        self._matrix = ff.matrix
        self._index = {sid: i for i, sid in enumerate(ff.ids)}

    def features(self, sample_ids) -> np.ndarray:
        """Rows for the requested ids, in request order."""
        missing = [s for s in sample_ids if s not in self._index]
        if missing:
            raise ProviderError(f"{self.path}: ids not present in feature file: {missing[:5]}")
        rows = np.array([self._index[s] for s in sample_ids], dtype=np.intp)
        return self._matrix[rows]


class OnnxProvider:
    """Runs an exported feature-extraction graph with onnxruntime.

    The graph must take a single input named "input"; a sidecar metadata
    JSON (``<model>.meta.json``) declares the input layout ("NCHW" or
    "NHWC") for the (H, W, 3) centered tensors this provider receives.
    """

    def __init__(self, model_path, expected_width: int | None = None, batch_size: int = 8):
        try:
            import onnxruntime  # noqa: F401 -- optional dependency
        except ImportError as exc:
            raise ProviderError(
                "the onnx backend requires the 'onnxruntime' package "
                "(pip install radfuse[onnx])"
            ) from exc
        import onnxruntime as ort

        self.path = str(model_path)
        self.batch_size = batch_size
        meta_path = Path(str(model_path) + ".meta.json")
        self.layout = "NCHW"
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            self.layout = meta.get("input_layout", "NCHW")
        if self.layout not in ("NCHW", "NHWC"):
            raise ProviderError(f"{meta_path}: unsupported input layout {self.layout!r}")

        self._session = ort.InferenceSession(self.path, providers=["CPUExecutionProvider"])
        names = [i.name for i in self._session.get_inputs()]
        if "input" not in names:
            raise ProviderError(f"{self.path}: graph has inputs {names}, expected 'input'")

        probe = np.zeros((1, 3, 224, 224) if self.layout == "NCHW" else (1, 224, 224, 3), np.float32)
        out = self._session.run(None, {"input": probe})[0]
        width = int(np.prod(out.shape[1:]))
        if expected_width is not None and width != expected_width:
            raise ProviderError(f"{self.path}: output flattens to {width}, expected {expected_width}")
        self.width = width

    def features(self, tensors) -> np.ndarray:
        """Flattened graph outputs for a batch of (H, W, 3) centered tensors."""
        rows = []
        batch, size = list(tensors), self.batch_size
        for start in range(0, len(batch), size):
            block = np.stack([np.asarray(t, dtype=np.float32) for t in batch[start : start + size]])
            if self.layout == "NCHW":
                block = np.transpose(block, (0, 3, 1, 2))
            out = self._session.run(None, {"input": np.ascontiguousarray(block)})[0]
            rows.append(out.reshape(out.shape[0], -1))
        got = np.concatenate(rows, axis=0)
        if got.shape[1] != self.width:
            raise ProviderError(f"{self.path}: output width changed to {got.shape[1]}")
        return got


def deep_features(provider, inputs) -> np.ndarray:
    """Feature matrix for a batch of inputs, rows in input order.

    ``inputs`` are sample ids for a PrecomputedProvider and centered
    (H, W, 3) tensors for an OnnxProvider.
    """
    inputs = list(inputs)
    rows = provider.features(inputs)
    if rows.ndim != 2 or rows.shape[0] != len(inputs):
        raise ProviderError(f"provider returned shape {rows.shape} for {len(inputs)} inputs")
    if not np.all(np.isfinite(rows)):
        raise ProviderError("provider returned non-finite feature values")
    return rows


def _gram(x: np.ndarray, y: np.ndarray | None = None, block: int = 512) -> np.ndarray:
    """Double-precision Gram matrix x @ y.T, computed in row blocks."""
    y = x if y is None else y
    out = np.empty((x.shape[0], y.shape[0]), dtype=np.float64)
    yt = y.astype(np.float64, copy=False).T
    for start in range(0, x.shape[0], block):
        stop = min(start + block, x.shape[0])
        out[start:stop] = x[start:stop].astype(np.float64, copy=False) @ yt
    return out


def _rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    xx = np.sum(x.astype(np.float64) ** 2, axis=1)
    yy = np.sum(y.astype(np.float64) ** 2, axis=1)
    sq = xx[:, None] + yy[None, :] - 2.0 * _gram(x, y)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclasses.dataclass
class KpcaModel:
    """Fitted kernel PCA reduction.

    The linear kernel stores an equivalent input-space projection (mean +
    W x k matrix); the rbf kernel stores the training reference vectors
    and kernel-centering statistics. Eigenvalues are sorted descending.
    """

    kernel: str
    n_components: int
    eigenvalues: np.ndarray
    input_width: int
    gamma: float | None = None
    # linear kernel
    mean: np.ndarray | None = None
    projection: np.ndarray | None = None
    # rbf kernel
    references: np.ndarray | None = None
    alphas: np.ndarray | None = None
    train_col_means: np.ndarray | None = None
    train_grand_mean: float | None = None


def kpca_fit(x, k: int = DEFAULT_COMPONENTS, kernel: str = "linear", gamma: float | None = None) -> KpcaModel:
    """Fit kernel PCA on training rows via the n x n Gram route.

    The kernel matrix is double-centered and eigendecomposed; the top
    eigenpairs with eigenvalue > 1e-10 * lambda_max are kept, capped at
    ``k``. Training scores are ``eigvec_j . K'_i / sqrt(lambda_j)``.
    """
    if k <= 0:
        raise ValueError(f"requested components must be positive, got {k}")
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"kpca_fit needs a 2-D matrix with >= 2 rows, got shape {x.shape}")
    n = x.shape[0]

    if kernel == "linear":
        kmat = _gram(x)
    elif kernel == "rbf":
        gamma = 1.0 / x.shape[1] if gamma is None else float(gamma)
        kmat = _rbf_kernel(x, x, gamma)
    else:
        raise ValueError(f"unsupported kernel {kernel!r}")

    row_means = kmat.mean(axis=1)
    grand = float(kmat.mean())
    centered = kmat - row_means[:, None] - row_means[None, :] + grand
    centered = (centered + centered.T) / 2.0

    eigvals, eigvecs = np.linalg.eigh(centered)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    keep = eigvals > EIG_TOL * max(eigvals[0], 0.0)
    n_keep = int(np.sum(keep))
    if n_keep == 0:
        raise DegenerateDataError("kernel matrix has no usable variance (identical rows?)")
    n_comp = min(k, n_keep)
    eigvals = eigvals[:n_comp]
    eigvecs = eigvecs[:, :n_comp]

    model = KpcaModel(
        kernel=kernel,
        n_components=n_comp,
        eigenvalues=eigvals,
        input_width=x.shape[1],
        gamma=gamma if kernel == "rbf" else None,
    )
    if kernel == "linear":
        # (x - mean) @ projection reproduces the Gram-route scores exactly.
        mean = x.astype(np.float64, copy=False).mean(axis=0)
        scaled = eigvecs / np.sqrt(eigvals)
        centered_x = x.astype(np.float64, copy=False) - mean
        model.mean = mean
        model.projection = centered_x.T @ scaled
    else:
        model.references = np.array(x, dtype=np.float64, copy=True)
        model.alphas = eigvecs / np.sqrt(eigvals)
        model.train_col_means = row_means
        model.train_grand_mean = grand
    return model


def kpca_transform(model: KpcaModel, x) -> np.ndarray:
    """Project new rows onto the fitted components.

    Training rows reproduce their fit-time scores; transformed training
    columns have zero mean and Gram equal to diag(eigenvalues).
    """
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.input_width:
        raise ValueError(f"rows are {x.shape[1]} wide, model expects {model.input_width}")

    if model.kernel == "linear":
        return (x.astype(np.float64, copy=False) - model.mean) @ model.projection

    kmat = _rbf_kernel(x, model.references, model.gamma)
    row_means = kmat.mean(axis=1)
    centered = kmat - model.train_col_means[None, :] - row_means[:, None] + model.train_grand_mean
    return centered @ model.alphas
