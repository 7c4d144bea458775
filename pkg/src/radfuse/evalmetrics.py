"""Confusion matrix, per-class and macro metrics, 95% confidence intervals.

Macro metrics are unweighted means over the three classes. Confidence
half-widths use the normal approximation 1.96 * sqrt(m (1 - m) / n) with
n the test-set size, applied to accuracy and macro F1 alike.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .classifier import CLASSES

Z_95 = 1.96


def confusion_matrix(y_true, y_pred, classes=CLASSES) -> np.ndarray:
    """3x3 counts; rows are true classes, columns predicted classes."""
    index = {c: i for i, c in enumerate(classes)}
    y_true, y_pred = list(y_true), list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index or p not in index:
            raise ValueError(f"label outside class set: {t!r} / {p!r}")
        cm[index[t], index[p]] += 1
    return cm


def per_class_metrics(cm: np.ndarray):
    """(precision, recall, f1) arrays; zero-denominator cases count as 0."""
    cm = np.asarray(cm, dtype=np.float64)
    diag = np.diag(cm)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / np.where(col > 0, col, 1.0), 0.0)
        recall = np.where(row > 0, diag / np.where(row > 0, row, 1.0), 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    return precision, recall, f1


def macro_metrics(cm: np.ndarray):
    """(accuracy, macro precision, macro recall, macro F1)."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    precision, recall, f1 = per_class_metrics(cm)
    accuracy = float(np.trace(cm) / total)
    return accuracy, float(precision.mean()), float(recall.mean()), float(f1.mean())


def confidence_interval(metric: float, n: int) -> float:
    """95% half-width under the normal approximation for a proportion."""
    if not 0.0 <= metric <= 1.0:
        raise ValueError(f"metric must lie in [0, 1], got {metric}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Z_95 * float(np.sqrt(metric * (1.0 - metric) / n))


def covid_rates(cm: np.ndarray, covid_index: int = 0):
    """(false negative rate, false positive rate) for the covid class.

    FNR: covid cases predicted as anything else, over all covid cases.
    FPR: non-covid cases predicted covid, over all non-covid cases.
    Returns None for a rate whose denominator is zero.
    """
    cm = np.asarray(cm, dtype=np.float64)
    row = cm[covid_index].sum()
    col = cm[:, covid_index].sum()
    other = cm.sum() - row
    fnr = None if row == 0 else float((row - cm[covid_index, covid_index]) / row)
    fpr = None if other == 0 else float((col - cm[covid_index, covid_index]) / other)
    return fnr, fpr


@dataclasses.dataclass
class EvalReport:
    classes: tuple
    confusion: np.ndarray
    n_test: int
    accuracy: float
    accuracy_ci: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_f1_ci: float
    per_class: dict  # class -> {precision, recall, f1}
    covid_fnr: float | None
    covid_fpr: float | None

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "confusion_matrix": self.confusion.tolist(),
            "n_test": self.n_test,
            "accuracy": self.accuracy,
            "accuracy_ci95": self.accuracy_ci,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "macro_f1_ci95": self.macro_f1_ci,
            "per_class": self.per_class,
            "covid_false_negative_rate": self.covid_fnr,
            "covid_false_positive_rate": self.covid_fpr,
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_table(self) -> str:
        """Aligned text table in the style of the usual results tables."""
        lines = [
            f"n_test = {self.n_test}",
            f"accuracy  {self.accuracy:.3f} +/- {self.accuracy_ci:.3f}",
            f"macro F1  {self.macro_f1:.3f} +/- {self.macro_f1_ci:.3f}",
            "",
            f"{'class':<12}{'precision':>10}{'recall':>10}{'f1':>10}",
        ]
        for cls in self.classes:
            m = self.per_class[cls]
            lines.append(f"{cls:<12}{m['precision']:>10.3f}{m['recall']:>10.3f}{m['f1']:>10.3f}")
        fnr = "n/a" if self.covid_fnr is None else f"{100 * self.covid_fnr:.2f}%"
        fpr = "n/a" if self.covid_fpr is None else f"{100 * self.covid_fpr:.2f}%"
        lines += ["", f"covid FNR = {fnr}   covid FPR = {fpr}", "", "confusion matrix (rows=true, cols=pred)"]
        header = "".join(f"{c:>12}" for c in self.classes)
        lines.append(f"{'':<12}{header}")
        for i, cls in enumerate(self.classes):
            row = "".join(f"{int(v):>12}" for v in self.confusion[i])
            lines.append(f"{cls:<12}{row}")
        return "\n".join(lines)


def evaluate(y_true, y_pred, classes=CLASSES) -> EvalReport:
    """Full report for a labeled evaluation set."""
    cm = confusion_matrix(y_true, y_pred, classes)
    n = int(cm.sum())
    accuracy, macro_p, macro_r, macro_f1 = macro_metrics(cm)
    precision, recall, f1 = per_class_metrics(cm)
    fnr, fpr = covid_rates(cm, classes.index("covid") if "covid" in classes else 0)
    return EvalReport(
        classes=tuple(classes),
        confusion=cm,
        n_test=n,
        accuracy=accuracy,
        accuracy_ci=confidence_interval(accuracy, n),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1,
        macro_f1_ci=confidence_interval(macro_f1, n),
        per_class={
            cls: {"precision": float(precision[i]), "recall": float(recall[i]), "f1": float(f1[i])}
            for i, cls in enumerate(classes)
        },
        covid_fnr=fnr,
        covid_fpr=fpr,
    )


def confusion_to_csv(cm: np.ndarray, classes=CLASSES) -> str:
    lines = ["true\\pred," + ",".join(classes)]
    for i, cls in enumerate(classes):
        lines.append(cls + "," + ",".join(str(int(v)) for v in np.asarray(cm)[i]))
    return "\n".join(lines) + "\n"


def confusion_heatmap_png(cm: np.ndarray, path, classes=CLASSES, title: str = "") -> None:
    """Render the confusion matrix to a PNG file (requires matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cm = np.asarray(cm)
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(len(classes)), classes)
    ax.set_yticks(range(len(classes)), classes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    threshold = cm.max() / 2.0 if cm.max() > 0 else 0.5
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            color = "white" if cm[i, j] > threshold else "black"
            ax.text(j, i, str(int(cm[i, j])), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
