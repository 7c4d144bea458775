import csv
import io
import json

import pytest

from radfuse.cli import main
from radfuse.featurefile import read_rff1

from conftest import random_u8, save_png


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, toy_data, toy_deep_file):
    """Config + paths shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {
        "features": {
            "groups": ["texture", "wavelet"],
            "deep": {"backend": "precomputed", "feature_path": str(toy_deep_file), "width": 4096},
        },
        "kpca": {"k": 6},
        "svm": {"seed": 3},
        "paths": {
            "manifest": str(toy_data["manifest"]),
            "model_out": str(root / "model.json"),
            "report_out": str(root / "train_report.json"),
        },
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg))

    hc_cfg = {
        "features": {"groups": ["texture", "wavelet"]},
        "svm": {"seed": 3},
        "paths": {"manifest": str(toy_data["manifest"]), "model_out": str(root / "model_hc.json")},
    }
    hc_cfg_path = root / "config_hc.json"
    hc_cfg_path.write_text(json.dumps(hc_cfg))
    return {"root": root, "config": cfg_path, "config_hc": hc_cfg_path, "cfg_doc": cfg}


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExtract:
    def test_all_groups_308(self, capsys, toy_data, tmp_path):
        out = tmp_path / "hc.rff1"
        code, _, _ = run_cli(capsys, "extract", "--manifest", str(toy_data["manifest"]), "--out", str(out))
        assert code == 0
        ff = read_rff1(out)
        assert ff.n_features == 308
        assert ff.n_samples == 12
        assert ff.group_layout[0] == ("texture", 14)

    def test_wavelet_only_112(self, capsys, toy_data, tmp_path):
        out = tmp_path / "wave.rff1"
        code, _, _ = run_cli(
            capsys, "extract", "--manifest", str(toy_data["manifest"]), "--out", str(out), "--groups", "wavelet"
        )
        assert code == 0
        assert read_rff1(out).n_features == 112

    def test_missing_manifest_exit_2_no_output(self, capsys, tmp_path):
        out = tmp_path / "never.rff1"
        code, _, err = run_cli(capsys, "extract", "--manifest", str(tmp_path / "ghost.csv"), "--out", str(out))
        assert code == 2
        assert not out.exists()

    def test_bad_group_exit_2(self, capsys, toy_data, tmp_path):
        code, _, _ = run_cli(
            capsys, "extract", "--manifest", str(toy_data["manifest"]),
            "--out", str(tmp_path / "x.rff1"), "--groups", "texture,bogus",
        )
        assert code == 2

    def test_jobs_parallel_same_bytes(self, capsys, toy_data, tmp_path):
        a, b = tmp_path / "a.rff1", tmp_path / "b.rff1"
        run_cli(capsys, "extract", "--manifest", str(toy_data["manifest"]), "--out", str(a),
                "--groups", "texture", "--jobs", "1")
        run_cli(capsys, "extract", "--manifest", str(toy_data["manifest"]), "--out", str(b),
                "--groups", "texture", "--jobs", "2")
        assert a.read_bytes() == b.read_bytes()


class TestTrain:
    def test_happy_path_writes_model_and_report(self, capsys, workdir):
        code, out, _ = run_cli(capsys, "train", "--config", str(workdir["config"]))
        assert code == 0
        report = json.loads(out.strip().splitlines()[-1])
        assert report["train_accuracy"] == 1.0
        assert (workdir["root"] / "model.json").exists()
        assert (workdir["root"] / "train_report.json").exists()

    def test_rerun_identical_model_bytes(self, capsys, workdir, tmp_path):
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        c1, _, _ = run_cli(capsys, "train", "--config", str(workdir["config"]), "--model-out", str(m1))
        c2, _, _ = run_cli(capsys, "train", "--config", str(workdir["config"]), "--model-out", str(m2))
        assert c1 == c2 == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_k_exceeding_rank_warns_and_clamps(self, capsys, caplog, workdir, tmp_path):
        doc = json.loads(workdir["config"].read_text())
        doc["kpca"]["k"] = 1000
        cfg = tmp_path / "big_k.json"
        cfg.write_text(json.dumps(doc))
        code, out, _ = run_cli(capsys, "train", "--config", str(cfg), "--model-out", str(tmp_path / "m.json"))
        assert code == 0
        report = json.loads(out.strip().splitlines()[-1])
        assert report["kpca_k_clamped"] is True
        assert any("clamped" in rec.message for rec in caplog.records)

    def test_unknown_config_key_exit_2(self, capsys, tmp_path, workdir):
        doc = json.loads(workdir["config"].read_text())
        doc["svn"] = {"C": 1.0}  # typo'd section
        cfg = tmp_path / "typo.json"
        cfg.write_text(json.dumps(doc))
        code, _, _ = run_cli(capsys, "train", "--config", str(cfg))
        assert code == 2

    def test_train_handcrafted_only(self, capsys, workdir):
        code, out, _ = run_cli(capsys, "train", "--config", str(workdir["config_hc"]))
        assert code == 0
        assert (workdir["root"] / "model_hc.json").exists()


class TestEval:
    def test_eval_full_manifest(self, capsys, workdir, toy_data):
        model = workdir["root"] / "model.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config"]))
        code, out, err = run_cli(
            capsys, "eval", "--model", str(model), "--manifest", str(toy_data["manifest"])
        )
        assert code == 0
        doc = json.loads(out.strip().splitlines()[-1])
        assert doc["accuracy"] == 1.0
        assert doc["accuracy_ci95"] == 0.0
        assert "covid_false_negative_rate" in doc
        assert "covid_false_positive_rate" in doc
        assert "confusion matrix" in err

    def test_eval_test_split_and_artifacts(self, capsys, workdir, toy_data, tmp_path):
        pytest.importorskip("matplotlib")
        model = workdir["root"] / "model.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config"]))
        out_json = tmp_path / "report.json"
        out_csv = tmp_path / "cm.csv"
        out_png = tmp_path / "cm.png"
        code, out, _ = run_cli(
            capsys, "eval", "--model", str(model), "--manifest", str(toy_data["manifest"]),
            "--use-split", "test", "--out", str(out_json), "--csv", str(out_csv), "--png", str(out_png),
        )
        assert code == 0
        doc = json.loads(out_json.read_text())
        assert doc["n_test"] == 3  # 12 toy images -> 9 train / 3 test
        assert out_csv.read_text().startswith("true\\pred")
        assert out_png.stat().st_size > 0

    def test_fused_vs_handcrafted_reports_comparable(self, capsys, workdir, toy_data):
        for cfg_key, model_name in (("config", "model.json"), ("config_hc", "model_hc.json")):
            model = workdir["root"] / model_name
            if not model.exists():
                run_cli(capsys, "train", "--config", str(workdir[cfg_key]))
        rows = {}
        for model_name in ("model.json", "model_hc.json"):
            code, out, _ = run_cli(
                capsys, "eval", "--model", str(workdir["root"] / model_name),
                "--manifest", str(toy_data["manifest"]),
            )
            assert code == 0
            rows[model_name] = json.loads(out.strip().splitlines()[-1])
        assert set(rows["model.json"]) == set(rows["model_hc.json"])  # same report schema

    def test_eval_missing_model_exit_3(self, capsys, toy_data, tmp_path):
        code, _, _ = run_cli(
            capsys, "eval", "--model", str(tmp_path / "no.json"), "--manifest", str(toy_data["manifest"])
        )
        assert code == 3


class TestPredict:
    def test_jsonl_per_image(self, capsys, workdir, toy_data):
        model = workdir["root"] / "model_hc.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config_hc"]))
        records_dir = toy_data["root"] / "covid"
        image = sorted(records_dir.iterdir())[0]
        code, out, _ = run_cli(capsys, "predict", "--model", str(model), str(image))
        assert code == 0
        lines = [json.loads(l) for l in out.strip().splitlines()]
        assert len(lines) == 1
        assert lines[0]["label"] in ("covid", "normal", "pneumonia")
        assert set(lines[0]["scores"]) == {"covid", "normal", "pneumonia"}

    def test_partial_failure_exit_3_others_emitted(self, capsys, workdir, toy_data, tmp_path, rng):
        model = workdir["root"] / "model_hc.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config_hc"]))
        good = save_png(tmp_path / "good.png", random_u8(rng, (32, 32)))
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"nonsense")
        code, out, _ = run_cli(capsys, "predict", "--model", str(model), str(good), str(bad))
        assert code == 3
        lines = [json.loads(l) for l in out.strip().splitlines()]
        assert len(lines) == 2
        assert "label" in lines[0]
        assert "error" in lines[1]

    def test_id_keys_precomputed_deep_backend(self, capsys, workdir, toy_data):
        model = workdir["root"] / "model.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config"]))
        image = sorted((toy_data["root"] / "covid").iterdir())[0]
        sample_id = f"covid/{image.name}"
        code, out, _ = run_cli(capsys, "predict", "--model", str(model), "--id", sample_id, str(image))
        assert code == 0
        line = json.loads(out.strip().splitlines()[-1])
        assert line["label"] == "covid"
        # without the id, the stem is not in the feature file -> data error
        code, out, _ = run_cli(capsys, "predict", "--model", str(model), str(image))
        assert code == 3
        assert "error" in json.loads(out.strip().splitlines()[-1])

    def test_mismatched_id_count_exit_2(self, capsys, workdir, toy_data):
        model = workdir["root"] / "model.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config"]))
        images = [str(p) for p in sorted((toy_data["root"] / "covid").iterdir())[:2]]
        code, _, _ = run_cli(capsys, "predict", "--model", str(model), "--id", "just-one", *images)
        assert code == 2

    def test_csv_format(self, capsys, workdir, toy_data):
        model = workdir["root"] / "model_hc.json"
        if not model.exists():
            run_cli(capsys, "train", "--config", str(workdir["config_hc"]))
        image = sorted((toy_data["root"] / "normal").iterdir())[0]
        code, out, _ = run_cli(capsys, "predict", "--model", str(model), "--format", "csv", str(image))
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["path", "label", "covid", "normal", "pneumonia", "error"]
        assert len(rows) == 2
