import csv
import hashlib
import json
import subprocess
import sys

import pytest

from canyonpl.cli import main

SMALL_SYNTH = ["--length-min", "40", "--length-max", "60", "--density-min", "0.1",
               "--density-max", "0.3", "--links-min", "5", "--links-max", "8"]


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def scenes(tmp_path_factory):
    out = tmp_path_factory.mktemp("scenes")
    assert main(["synth", "--streets", "13", "--seed", "4", "--out", str(out), *SMALL_SYNTH]) == 0
    return out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestExitCodes:
    def test_no_command(self):
        assert main([]) == 2

    def test_bad_streets(self, tmp_path):
        assert main(["synth", "--streets", "0", "--out", str(tmp_path)]) == 2

    def test_missing_scenes(self, tmp_path):
        assert main(["evaluate", "--scenes", str(tmp_path / "nope"), "--out", str(tmp_path)]) == 2

    def test_unknown_family(self, scenes, tmp_path):
        assert main(["evaluate", "--scenes", str(scenes), "--families", "knn", "--out", str(tmp_path)]) == 2

    def test_unknown_protocol(self, scenes, tmp_path):
        assert main(["evaluate", "--scenes", str(scenes), "--protocol", "random", "--out", str(tmp_path)]) == 2

    def test_building_set_needs_ae(self, scenes, tmp_path):
        assert main(["featurize", "--scenes", str(scenes), "--feature-set", "clutter_building",
                     "--out", str(tmp_path / "f.csv")]) == 2

    def test_bad_workers_env(self, scenes, tmp_path, monkeypatch):
        monkeypatch.setenv("CANYONPL_WORKERS", "many")
        assert main(["evaluate", "--scenes", str(scenes), "--out", str(tmp_path)]) == 2

    def test_corrupt_scene_runtime_error(self, tmp_path):
        (tmp_path / "streets.csv").write_text("garbage\n")
        assert main(["evaluate", "--scenes", str(tmp_path), "--out", str(tmp_path / "o")]) == 1

    def test_help(self):
        assert main(["--help"]) == 0


class TestConfig:
    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"streets": 2, "colour": "red"}))
        assert main(["synth", "--config", str(cfg)]) == 2

    def test_config_supplies_required(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"streets": 2, "out": str(tmp_path / "s"), "length_min": 40.0,
                                   "length_max": 50.0, "links_min": 5, "links_max": 6}))
        assert main(["synth", "--config", str(cfg)]) == 0
        assert len(rows(tmp_path / "s" / "streets.csv")) == 2

    def test_missing_required_after_config(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"streets": 2}))
        assert main(["synth", "--config", str(cfg)]) == 2


class TestPipeline:
    def test_synth_deterministic(self, scenes, tmp_path):
        assert main(["synth", "--streets", "13", "--seed", "4", "--out", str(tmp_path), *SMALL_SYNTH]) == 0
        for name in ("streets.csv", "links.csv", "generator.json"):
            assert digest(tmp_path / name) == digest(scenes / name)

    def test_street_by_street_13_folds(self, scenes, tmp_path):
        assert main(["evaluate", "--scenes", str(scenes), "--families", "lasso",
                     "--out", str(tmp_path / "a")]) == 0
        folds = rows(tmp_path / "a" / "folds.csv")
        assert len(folds) == 13
        preds = rows(tmp_path / "a" / "predictions.csv")
        assert len(preds) == len(rows(scenes / "links.csv"))
        assert len({p["link_id"] for p in preds}) == len(preds)
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert set(summary["models"]) == {"lasso", "slope_intercept", "uma_los", "umi_nlos"}

        # rerun, also in parallel: identical bytes
        assert main(["evaluate", "--scenes", str(scenes), "--families", "lasso", "--workers", "2",
                     "--out", str(tmp_path / "b")]) == 0
        for name in ("folds.csv", "predictions.csv", "distance_bins.csv", "summary.json"):
            assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name)

        assert main(["report", "--input", str(tmp_path / "a"), "--out", str(tmp_path / "r1")]) == 0
        assert main(["report", "--input", str(tmp_path / "a"), "--out", str(tmp_path / "r2")]) == 0
        svg = (tmp_path / "r1" / "scatter.svg").read_text()
        assert svg.count('class="pt"') == len(preds)
        assert (tmp_path / "r1" / "rmse_box.svg").read_text().count('class="box"') == 4
        for name in ("rmse_box.svg", "scatter.svg", "report.json"):
            assert digest(tmp_path / "r1" / name) == digest(tmp_path / "r2" / name)
        assert main(["report", "--input", str(tmp_path / "a"), "--model", "rf", "--out", str(tmp_path / "r3")]) == 2

    def test_shuffle_split_25(self, scenes, tmp_path):
        assert main(["evaluate", "--scenes", str(scenes), "--families", "elasticnet", "--protocol",
                     "shuffle-split", "--iterations", "25", "--seed", "1", "--out", str(tmp_path)]) == 0
        folds = rows(tmp_path / "folds.csv")
        n = len(rows(scenes / "links.csv"))
        assert len(folds) == 25 and all(int(f["n_train"]) == int(0.8 * n) for f in folds)

    def test_featurize_train(self, scenes, tmp_path):
        assert main(["featurize", "--scenes", str(scenes), "--feature-set", "clutter4",
                     "--out", str(tmp_path / "f.csv")]) == 0
        header = (tmp_path / "f.csv").read_text().splitlines()[0]
        for c in ("log3d", "clutter_per_street", "clutter_per_link", "both_sides"):
            assert c in header
        assert main(["train", "--features", str(tmp_path / "f.csv"), "--family", "lasso",
                     "--out", str(tmp_path / "m.bin")]) == 0
        assert (tmp_path / "m.bin").read_bytes()[:8] == b"CNPLMODL"

    def test_train_ae_then_building_features(self, scenes, tmp_path):
        assert main(["train-ae", "--scenes", str(scenes), "--streets", "S01,S02,S03", "--ae-epochs", "1",
                     "--out", str(tmp_path / "ae.bin")]) == 0
        assert main(["featurize", "--scenes", str(scenes), "--feature-set", "clutter4_building",
                     "--ae", str(tmp_path / "ae.bin"), "--out", str(tmp_path / "f.csv")]) == 0
        header = (tmp_path / "f.csv").read_text().splitlines()[0]
        assert "ae11" in header and "ae12" not in header
        assert main(["train-ae", "--scenes", str(scenes), "--streets", "S99",
                     "--out", str(tmp_path / "x.bin")]) == 2

    def test_importance_and_weights_plot(self, scenes, tmp_path):
        assert main(["importance", "--scenes", str(scenes), "--family", "lasso",
                     "--out", str(tmp_path / "e")]) == 0
        imp = json.loads((tmp_path / "e" / "importance.json").read_text())
        assert len(imp["lasso"]) == 7 and len(imp["leave_one_out"]) == 7
        assert main(["evaluate", "--scenes", str(scenes), "--families", "lasso", "--out", str(tmp_path / "e")]) == 0
        assert main(["report", "--input", str(tmp_path / "e"), "--out", str(tmp_path / "r")]) == 0
        assert (tmp_path / "r" / "weights.svg").read_text().count('class="bar"') == 7


def test_console_script_installed():
    r = subprocess.run([sys.executable, "-m", "canyonpl", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "evaluate" in r.stdout
