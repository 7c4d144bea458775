"""Acceptance suite: one test per release criterion.

Each test prints a PASS/FAIL line with its elapsed time (visible under
``pytest -s tests/test_acceptance.py``) and enforces the criterion's
stated numeric tolerance and runtime budget. The whole suite runs
without any deep-learning framework or exported model: deep features
come from the seeded random-convolution stand-in.
"""

import contextlib
import time

import numpy as np
import pytest

from radfuse import pipeline as pl
from radfuse.classifier import SvmTrainConfig, svm_decision, svm_fit, svm_predict
from radfuse.config import validate_config
from radfuse.deepfeat import kpca_fit, kpca_transform
from radfuse.evalmetrics import confidence_interval, evaluate
from radfuse.featurefile import write_rff1
from radfuse.handcrafted import (
    GLCM_ANGLES,
    extract_handcrafted,
    fft_magnitude,
    glcm_matrix,
    gldm_histogram,
    group_layout,
    haar_dwt2,
)
from radfuse.stats import STAT_NAMES, compute_stats
from radfuse.synth import make_dataset, write_standin_deep_features

from oracles import align_signs, glcm_oracle, pca_scores_oracle, stats_oracle, svm_qp_oracle
from test_classifier import three_blobs


@contextlib.contextmanager
def criterion(name: str, limit_seconds: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"FAIL  {name}")
        raise
    elapsed = time.perf_counter() - start
    within = elapsed <= limit_seconds
    print(f"{'PASS' if within else 'FAIL'}  {name}  [{elapsed:.2f}s / {limit_seconds:g}s]")
    assert within, f"{name}: {elapsed:.2f}s exceeded the {limit_seconds:g}s budget"


def test_feature_count_contract():
    rng = np.random.default_rng(0)
    with criterion("feature-count contract: 308 = 14/56/56/14/112/56 on 50 images", 30):
        layout = group_layout()
        assert [w for _, w in layout] == [14, 56, 56, 14, 112, 56]
        assert sum(w for _, w in layout) == 308
        for _ in range(50):
            img = rng.integers(0, 256, size=(224, 224)).astype(np.uint8)
            vec = extract_handcrafted(img)
            assert vec.shape == (308,)
            assert np.all(np.isfinite(vec))


def test_glcm_matches_naive_oracle():
    rng = np.random.default_rng(1)
    offsets = [(0, 1), (-1, 1), (-1, 0), (-1, -1)]
    with criterion("GLCM == naive pair counting, 200 images x 4 directions", 10):
        for _ in range(200):
            levels = int(rng.integers(4, 257))
            h, w = int(rng.integers(2, 17)), int(rng.integers(2, 17))
            img = rng.integers(0, levels, size=(h, w)).astype(np.uint8)
            for angle, (dr, dc) in zip(GLCM_ANGLES, offsets):
                assert np.array_equal(glcm_matrix(img, angle), glcm_oracle(img, dr, dc))


def test_gldm_direction_symmetry():
    rng = np.random.default_rng(2)
    with criterion("GLDM histogram(t) == histogram(t+pi), 100 images", 5):
        for _ in range(100):
            img = rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
            assert np.array_equal(gldm_histogram(img, 0.0), gldm_histogram(img, np.pi))
            assert np.array_equal(
                gldm_histogram(img, np.pi / 2), gldm_histogram(img, 3 * np.pi / 2)
            )


def test_spectral_identities():
    rng = np.random.default_rng(3)
    with criterion("Haar energy <= 1e-8 rel; FFT Parseval <= 1e-6 rel, 100 images", 10):
        for _ in range(100):
            img = rng.integers(0, 256, size=(224, 224)).astype(np.float64)
            bands = haar_dwt2(img)
            e_in = np.sum(img * img)
            e_bands = sum(np.sum(b * b) for b in bands)
            assert abs(e_in - e_bands) <= 1e-8 * e_in
            ca2_bands = haar_dwt2(bands[0])
            e_ca = np.sum(bands[0] ** 2)
            assert abs(e_ca - sum(np.sum(b * b) for b in ca2_bands)) <= 1e-8 * e_ca

            mag = fft_magnitude(img.astype(np.uint8))
            spectral = np.sum(mag * mag)
            pixel = img.size * e_in
            assert abs(spectral - pixel) <= 1e-6 * pixel


def test_stats_match_bruteforce_oracle():
    rng = np.random.default_rng(4)
    with criterion("14 stats == brute-force oracle, 200 vectors, rel <= 1e-9", 5):
        lengths = [1, 10000] + [int(round(10 ** rng.uniform(0, 4))) for _ in range(198)]
        for n in lengths:
            kind = rng.integers(0, 3)
            if kind == 0:
                vec = rng.normal(rng.uniform(-100, 100), rng.uniform(0.1, 30), size=n)
            elif kind == 1:
                vec = rng.integers(0, 16, size=n).astype(float)
            else:
                vec = rng.uniform(-1e3, 1e3, size=n)
            got = compute_stats(vec)
            want = stats_oracle(vec)
            for name, value in zip(STAT_NAMES, got):
                ref = want[name]
                assert abs(value - ref) <= 1e-9 * max(1.0, abs(ref)), (name, n)

        constant = compute_stats([7.25] * 100)
        by_name = dict(zip(STAT_NAMES, constant))
        assert by_name["skewness"] == 0 and by_name["kurtosis"] == 0
        assert by_name["entropy"] == 0 and by_name["uniformity"] == 1


def test_svm_matches_qp_oracle():
    rng = np.random.default_rng(5)
    with criterion("SVM DCD == QP oracle (20 instances), dual monotone, blobs 100%", 60):
        for _ in range(20):
            n, d = int(rng.integers(6, 21)), int(rng.integers(1, 4))
            x = rng.normal(size=(n, d)) * rng.uniform(0.5, 2.0)
            y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            if np.all(y == y[0]):
                y[0] = -y[0]
            c = float(rng.uniform(0.1, 5.0))
            labels = np.where(y > 0, "covid", "normal")
            cfg = SvmTrainConfig(C=c, tol=1e-10, max_iter=20000, seed=6)
            model = svm_fit(x, labels, cfg, classes=("covid", "normal"))
            w_impl = np.append(model.weights[0], model.biases[0])
            w_oracle = svm_qp_oracle(x, y, c)
            assert np.max(np.abs(w_impl - w_oracle)) <= 1e-3
            for trace in model.dual_objectives:
                diffs = np.diff(trace)
                assert np.all(diffs >= -1e-9 * np.maximum(1.0, np.abs(trace[1:])))

        bx, by = three_blobs(np.random.default_rng(11))
        blob_model = svm_fit(bx, by, SvmTrainConfig(seed=1))
        assert svm_predict(blob_model, bx) == list(by)


def test_kpca_matches_pca_oracle():
    rng = np.random.default_rng(6)
    with criterion("linear KPCA == PCA scores (20 matrices), centering + Gram", 30):
        for _ in range(20):
            n, d = int(rng.integers(5, 60)), int(rng.integers(3, 40))
            x = rng.normal(size=(n, d)) @ np.diag(rng.uniform(0.1, 3.0, size=d))
            model = kpca_fit(x, k=1000, kernel="linear")
            scores = kpca_transform(model, x)
            want = pca_scores_oracle(x, model.n_components)
            got = align_signs(want, scores)
            scale = max(1.0, np.abs(want).max())
            assert np.max(np.abs(got - want)) <= 1e-6 * scale
            assert np.max(np.abs(scores.mean(axis=0))) <= 1e-8
            gram = scores.T @ scores
            assert np.max(np.abs(gram - np.diag(model.eigenvalues))) <= 1e-6 * model.eigenvalues[0]


# Frozen reference pairs (metric, 95% half-width) at n = 1029.
_REPORTED = [
    (0.762, 0.026), (0.771, 0.026), (0.896, 0.019), (0.880, 0.020),
    (0.900, 0.018), (0.894, 0.019), (0.818, 0.024), (0.809, 0.024),
    (0.940, 0.015), (0.934, 0.015), (0.874, 0.020), (0.880, 0.020),
    (0.963, 0.012), (0.957, 0.012), (0.982, 0.008), (0.983, 0.008),
    (0.983, 0.008), (0.984, 0.008), (0.988, 0.007), (0.989, 0.006),
    (0.987, 0.007), (0.988, 0.007),
]


def test_confidence_intervals_reproduce_reference_values():
    with criterion("CI half-widths match the frozen reference table (n=1029)", 1):
        for metric, reported in _REPORTED:
            got = round(confidence_interval(metric, 1029), 3)
            assert abs(got - reported) <= 0.001, (metric, reported, got)


def test_split_contract_5143():
    with criterion("5,143 records at 0.8 -> exactly 4,114 / 1,029", 1):
        records = []
        for label, count in (("covid", 1143), ("normal", 2000), ("pneumonia", 2000)):
            records.extend(
                pl.DatasetRecord(id=f"{label}{i:05d}", path="x.png", label=label)
                for i in range(count)
            )
        train, test = pl.split(records, pl.SplitSpec(train_fraction=0.8, seed=0))
        assert len(train) == 4114
        assert len(test) == 1029


@pytest.mark.slow
def test_end_to_end_desk_scale(tmp_path):
    with criterion("desk-scale e2e: fused >= 0.95 and >= handcrafted-only - 0.01", 300):
        manifest = make_dataset(tmp_path / "data", n_per_class=100, seed=123)
        deep_path = tmp_path / "deep.rff1"
        write_standin_deep_features(manifest, deep_path, seed=7)

        records = pl.ingest(manifest)
        train_recs, test_recs = pl.split(records, pl.SplitSpec(train_fraction=0.8, seed=0))
        assert len(train_recs) == 240 and len(test_recs) == 60

        # extract the 308 handcrafted features once, reuse for both runs
        hc_path = tmp_path / "handcrafted.rff1"
        base_cfg = validate_config({})
        matrix = pl.extract_handcrafted_matrix(records, base_cfg, jobs=1)
        write_rff1(
            hc_path,
            [r.id for r in records],
            matrix,
            extractor="handcrafted",
            group_layout=group_layout(),
            dtype="f64",
        )

        def run(with_deep: bool) -> float:
            doc = {"features": {"handcrafted_path": str(hc_path)}, "kpca": {"k": 1000}}
            if with_deep:
                doc["features"]["deep"] = {
                    "backend": "precomputed",
                    "feature_path": str(deep_path),
                    "width": 4096,
                }
            cfg = validate_config(doc)
            provider = pl.make_deep_provider(cfg)
            model, report = pl.train_pipeline(train_recs, cfg, provider=provider)
            x_test = pl.features_for_records(model, test_recs, provider=provider)
            pred = [model.svm.classes[i] for i in np.argmax(svm_decision(model.svm, x_test), axis=1)]
            return evaluate([r.label for r in test_recs], pred).accuracy

        fused_acc = run(with_deep=True)
        handcrafted_acc = run(with_deep=False)
        print(f"      fused={fused_acc:.3f} handcrafted-only={handcrafted_acc:.3f}")
        assert fused_acc >= 0.95
        assert fused_acc >= handcrafted_acc - 0.01
