"""Feature standardization and the one-vs-all linear SVM.

The three binary machines (covid, normal, pneumonia) each solve the
L2-regularized hinge-loss problem

    min_w  0.5 ||w||^2 + C * sum_i max(0, 1 - y_i * w . x_i)

by dual coordinate descent over 0 <= alpha_i <= C with a seeded random
permutation per epoch. The bias is carried as an augmented constant-1
feature (regularized like any other weight), which makes the primal the
plain quadratic above and keeps the solver oracle-testable against a
generic QP solve of the identical problem.

Fused features mix scales that differ by orders of magnitude (pixel-sum
"area" vs KPCA scores), so inputs are standardized to zero mean and unit
population std before training.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import RadfuseError

CLASSES = ("covid", "normal", "pneumonia")

_STD_EPS = 1e-12


@dataclasses.dataclass
class StandardizerModel:
    mean: np.ndarray
    scale: np.ndarray


def standardize_fit(x) -> StandardizerModel:
    """Per-column mean and population std (columns with std < 1e-12 get scale 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"standardize_fit needs a non-empty 2-D matrix, got shape {x.shape}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std < _STD_EPS, 1.0, std)
    return StandardizerModel(mean=mean, scale=scale)


def standardize_apply(model: StandardizerModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.mean.shape[0]:
        raise ValueError(f"rows are {x.shape[1]} wide, standardizer expects {model.mean.shape[0]}")
    return (x - model.mean) / model.scale


@dataclasses.dataclass(frozen=True)
class SvmTrainConfig:
    C: float = 1.0
    tol: float = 1e-4  # relative duality gap
    max_iter: int = 10000  # epochs
    seed: int = 0

    def validate(self) -> None:
        if not (self.C > 0 and self.tol > 0 and self.max_iter > 0):
            raise ValueError(f"SVM config fields must be positive: {self}")


@dataclasses.dataclass
class SvmModel:
    """One-vs-all linear machines: score_c = weights[c] . x + biases[c]."""

    classes: tuple
    weights: np.ndarray  # (n_classes, d)
    biases: np.ndarray  # (n_classes,)
    C: float
    converged: tuple
    # per-class list of per-epoch dual objective values; diagnostic only,
    # not serialized.
    dual_objectives: list = dataclasses.field(default_factory=list, repr=False)


def _dcd_hinge(x_aug: np.ndarray, y: np.ndarray, cfg: SvmTrainConfig, rng) -> tuple:
    """Dual coordinate descent for one binary machine on augmented features.

    Returns (w_aug, converged, dual_trace). The dual objective
    sum(alpha) - 0.5||w||^2 is nondecreasing per epoch by construction;
    a violation indicates a numerical fault and raises.
    """
    n, d = x_aug.shape
    c_up = cfg.C
    alpha = np.zeros(n)
    w = np.zeros(d)
    q_ii = np.einsum("ij,ij->i", x_aug, x_aug)
    trace = []
    converged = False

    prev_dual = -np.inf
    for _ in range(cfg.max_iter):
        for i in rng.permutation(n):
            xi = x_aug[i]
            grad = y[i] * (w @ xi) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(grad, 0.0)
            elif a >= c_up:
                pg = max(grad, 0.0)
            else:
                pg = grad
            if pg != 0.0:
                a_new = min(max(a - grad / q_ii[i], 0.0), c_up)
                if a_new != a:
                    w += (a_new - a) * y[i] * xi
                    alpha[i] = a_new

        w_norm2 = float(w @ w)
        dual = float(np.sum(alpha)) - 0.5 * w_norm2
        margins = 1.0 - y * (x_aug @ w)
        primal = 0.5 * w_norm2 + c_up * float(np.sum(np.maximum(margins, 0.0)))
        trace.append(dual)
        if dual < prev_dual - 1e-9 * max(1.0, abs(dual)):
            raise RadfuseError("dual objective decreased; numerical fault in SVM solver")
        prev_dual = dual
        if primal - dual <= cfg.tol * max(1.0, abs(primal)):
            converged = True
            break

    if np.any(alpha < 0.0) or np.any(alpha > c_up):
        raise RadfuseError("dual variables left the feasible box; numerical fault in SVM solver")

    # Rebuild w from alpha to shed incremental floating-point drift.
    w = x_aug.T @ (alpha * y)
    return w, converged, np.array(trace)


def svm_fit(x, y, cfg: SvmTrainConfig = SvmTrainConfig(), classes=CLASSES) -> SvmModel:
    """Train the one-vs-all machines on standardized features.

    ``y`` holds class labels (strings from ``classes``). Each machine is
    seeded with (cfg.seed, class index), so refits are bit-identical.
    Non-convergence within max_iter epochs is flagged, not raised.
    """
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"svm_fit needs >= 2 training rows, got shape {x.shape}")
    y = np.asarray(y)
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"{y.shape[0]} labels for {x.shape[0]} rows")
    present = set(str(v) for v in y)
    unknown = present - set(classes)
    if unknown:
        raise ValueError(f"labels outside the class set: {sorted(unknown)}")
    if len(present) < 2:
        raise ValueError("training data contains a single class; cannot fit one-vs-all SVM")

    n, d = x.shape
    x_aug = np.hstack([x, np.ones((n, 1))])
    weights = np.zeros((len(classes), d))
    biases = np.zeros(len(classes))
    converged = []
    traces = []
    for ci, cls in enumerate(classes):
        y_bin = np.where(y == cls, 1.0, -1.0)
        rng = np.random.default_rng([cfg.seed, ci])
        w_aug, ok, trace = _dcd_hinge(x_aug, y_bin, cfg, rng)
        weights[ci] = w_aug[:-1]
        biases[ci] = w_aug[-1]
        converged.append(bool(ok))
        traces.append(trace)

    return SvmModel(
        classes=tuple(classes),
        weights=weights,
        biases=biases,
        C=cfg.C,
        converged=tuple(converged),
        dual_objectives=traces,
    )


def svm_decision(model: SvmModel, x) -> np.ndarray:
    """Per-class decision scores; (3,) for one row, (n, 3) for a matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.weights.shape[1]:
        raise ValueError(f"rows are {x.shape[1]} wide, model expects {model.weights.shape[1]}")
    scores = x @ model.weights.T + model.biases
    return scores[0] if single else scores


def svm_predict(model: SvmModel, x) -> list:
    """Argmax-of-scores labels; ties resolve to the first class in order."""
    scores = svm_decision(model, x)
    if scores.ndim == 1:
        scores = scores[None, :]
    return [model.classes[i] for i in np.argmax(scores, axis=1)]
