"""End-to-end run at demo scale: dataset -> split -> train -> evaluate -> predict.

Generates 20 images per class, trains both a fused (handcrafted + reduced
stand-in deep) model and a handcrafted-only model, evaluates on the held
out split, and saves a confusion-matrix heatmap. This is the same flow the
`radfuse` CLI drives; see 06_cli_walkthrough.sh for the command version.

Run from the repository root:  python3 demos/05_full_pipeline.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from radfuse import pipeline as pl
from radfuse.classifier import svm_decision
from radfuse.config import validate_config
from radfuse.evalmetrics import evaluate
from radfuse.synth import make_dataset, write_standin_deep_features

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

work = Path(tempfile.mkdtemp(prefix="radfuse_demo_"))
manifest = make_dataset(work / "data", n_per_class=20, seed=11)
deep_path = work / "deep.rff1"
write_standin_deep_features(manifest, deep_path, seed=4)
print(f"toy dataset + stand-in deep features under {work}")

records = pl.ingest(manifest)
train_recs, test_recs = pl.split(records, pl.SplitSpec(train_fraction=0.8, seed=0))
print(f"{len(records)} images -> {len(train_recs)} train / {len(test_recs)} test (stratified)")


def train_and_eval(name: str, doc: dict):
    cfg = validate_config(doc)
    provider = pl.make_deep_provider(cfg)
    model, report = pl.train_pipeline(train_recs, cfg, provider=provider)
    x_test = pl.features_for_records(model, test_recs, provider=provider)
    pred = [model.svm.classes[i] for i in np.argmax(svm_decision(model.svm, x_test), axis=1)]
    rep = evaluate([r.label for r in test_recs], pred)
    print(f"{name:<18} width={report['fused_width']:4d}  train_acc={report['train_accuracy']:.3f}  "
          f"test_acc={rep.accuracy:.3f} +/- {rep.accuracy_ci:.3f}")
    return model, rep


fused_model, fused_rep = train_and_eval(
    "fused",
    {
        "features": {"deep": {"backend": "precomputed", "feature_path": str(deep_path), "width": 4096}},
        "kpca": {"k": 1000},
    },
)
hc_model, hc_rep = train_and_eval("handcrafted-only", {})

print("\nfused evaluation report:")
print(fused_rep.to_table())

model_path = OUT / "demo_model.json"
pl.save_model(fused_model, model_path)
reloaded = pl.load_model(model_path)
sample = test_recs[0]
provider = pl.make_deep_provider(reloaded.config)
label, scores = pl.predict(reloaded, sample.path, provider=provider, sample_id=sample.id)
print(f"\nround-tripped model predicts {label!r} for test image {sample.id!r} (true {sample.label!r})")
print(json.dumps(scores, indent=2))

try:
    from radfuse.evalmetrics import confusion_heatmap_png

    confusion_heatmap_png(fused_rep.confusion, OUT / "confusion.png", fused_rep.classes, title="fused model")
    print(f"wrote {OUT / 'confusion.png'}")
except ImportError:
    print("matplotlib not installed; skipping the heatmap")
