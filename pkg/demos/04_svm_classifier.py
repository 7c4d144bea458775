"""The one-vs-all linear SVM on a toy separable problem.

Shows standardization, the dual-coordinate-descent fit (with its
monotone dual objective), decision scores, and prediction.

Run from the repository root:  python3 demos/04_svm_classifier.py
"""

import numpy as np

from radfuse.classifier import (
    SvmTrainConfig,
    standardize_apply,
    standardize_fit,
    svm_decision,
    svm_fit,
    svm_predict,
)

rng = np.random.default_rng(3)
centers = {"covid": (0.0, 0.0), "normal": (10.0, 0.0), "pneumonia": (0.0, 10.0)}
x = np.vstack([rng.normal(size=(25, 2)) * 0.5 + c for c in centers.values()])
y = np.array([label for label in centers for _ in range(25)])

scaler = standardize_fit(x)
xs = standardize_apply(scaler, x)
print(f"standardized: column means ~ {np.abs(xs.mean(axis=0)).max():.1e}, stds ~ {xs.std(axis=0)}")

model = svm_fit(xs, y, SvmTrainConfig(C=1.0, tol=1e-6, seed=0))
print(f"converged: {model.converged}")
for cls, trace in zip(model.classes, model.dual_objectives):
    print(f"  {cls:<10} epochs={len(trace):3d}  dual {trace[0]:9.3f} -> {trace[-1]:9.3f} (nondecreasing)")

train_acc = np.mean(np.array(svm_predict(model, xs)) == y)
print(f"training accuracy: {train_acc:.3f}")

probe = standardize_apply(scaler, np.array([[9.5, 0.5]]))
scores = svm_decision(model, probe)[0]
print("probe near the 'normal' blob:")
for cls, s in zip(model.classes, scores):
    print(f"  score[{cls}] = {s:8.3f}")
print(f"prediction: {svm_predict(model, probe)[0]}")
