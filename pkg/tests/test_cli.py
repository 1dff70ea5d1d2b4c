"""End-to-end CLI behavior: pipelines, exit codes, error prefixes."""

import json
from pathlib import Path

import numpy as np
import pytest

from verbground.cli import main
from verbground.features import FeatureRecord, FeatureStore, read_feat, write_feat
from verbground.training import encode_command_text, load_checkpoint

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> split -> build -> train, shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    config = root / "config.json"
    config.write_text(json.dumps({
        "model": {"word_dim": 8, "hidden_dim": 12},
        "train": {"epochs": 2, "lr": 0.001, "seed": 5},
        "eval": {"n_tasks": 10, "runs": 2, "seed": 5},
    }))
    spec = root / "synth.json"
    spec.write_text(json.dumps({
        "n_verbs": 8, "n_classes": 32, "instances_per_class": 3,
        "dim": 16, "cluster_separation": 8.0, "noise_sigma": 1.0, "seed": 3,
    }))
    paths = {
        "config": config,
        "features": root / "features.feat",
        "pairs": root / "pairs.tsv",
        "manifest": root / "manifest.json",
        "samples": root / "samples.bin",
        "ckpt": root / "model.ckpt",
        "root": root,
    }
    assert main(["synth", "--spec", str(spec), "--out", str(paths["features"]),
                 "--pairs-out", str(paths["pairs"])]) == 0
    assert main(["split", "--pairs", str(paths["pairs"]), "--holdout", "0.25",
                 "--seed", "3", "--out", str(paths["manifest"])]) == 0
    assert main(["build", "--manifest", str(paths["manifest"]),
                 "--features", str(paths["features"]), "--size", "80",
                 "--seed", "3", "--out", str(paths["samples"]),
                 "--config", str(config)]) == 0
    assert main(["train", "--config", str(config), "--samples", str(paths["samples"]),
                 "--out", str(paths["ckpt"]), "--log", str(root / "train.log")]) == 0
    return paths


class TestPipeline:
    def test_artifacts_exist(self, pipeline):
        for key in ("features", "pairs", "manifest", "samples", "ckpt"):
            assert pipeline[key].exists()
        log_lines = (pipeline["root"] / "train.log").read_text().splitlines()
        assert len(log_lines) == 2

    def test_eval_report_fields_and_siblings(self, pipeline, capsys):
        out = pipeline["root"] / "report.json"
        code = main(["eval", "--ckpt", str(pipeline["ckpt"]),
                     "--manifest", str(pipeline["manifest"]),
                     "--features", str(pipeline["features"]),
                     "--runs", "2", "--tasks", "10", "--seed", "5",
                     "--out", str(out), "--config", str(pipeline["config"]),
                     "--dump-tasks", str(pipeline["root"] / "tasks.jsonl")])
        assert code == 0
        report = json.loads(out.read_text())
        assert {"n_tasks", "runs", "top1_mean", "top1_se", "top2_mean",
                "top2_se", "per_verb", "config_fingerprint"} <= set(report)
        assert out.with_suffix(".csv").exists()
        assert out.with_suffix(".png").exists()
        dumped = (pipeline["root"] / "tasks.jsonl").read_text().splitlines()
        assert len(dumped) == 10

    def test_eval_cross_dataset_via_pairs(self, pipeline):
        out = pipeline["root"] / "cross.json"
        code = main(["eval", "--ckpt", str(pipeline["ckpt"]),
                     "--pairs", str(pipeline["pairs"]),
                     "--features", str(pipeline["features"]),
                     "--runs", "1", "--tasks", "8", "--out", str(out),
                     "--no-figure"])
        assert code == 0
        assert json.loads(out.read_text())["runs"] == 1

    def test_eval_rejects_both_sources(self, pipeline, capsys):
        code = main(["eval", "--ckpt", str(pipeline["ckpt"]),
                     "--manifest", str(pipeline["manifest"]),
                     "--pairs", str(pipeline["pairs"]),
                     "--features", str(pipeline["features"]),
                     "--out", str(pipeline["root"] / "x.json")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error_code: config:")

    def test_retrieve_exact_match_prints_similarity_one(self, pipeline, capsys):
        checkpoint = load_checkpoint(pipeline["ckpt"])
        command = "hand me something to contain"
        embedding = encode_command_text(checkpoint, command).astype(np.float32)
        rng = np.random.default_rng(0)
        records = [FeatureRecord("match", 7, embedding)]
        records += [
            FeatureRecord(f"other{i}", 0,
                          rng.standard_normal(embedding.size).astype(np.float32))
            for i in range(4)
        ]
        store_path = pipeline["root"] / "retrieve.feat"
        write_feat(FeatureStore(embedding.size, records), store_path)
        code = main(["retrieve", "--ckpt", str(pipeline["ckpt"]),
                     "--features", str(store_path), "--command", command,
                     "--k", "2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        first = lines[0].split("\t")
        assert first[0] == "match"
        assert first[2] == "1.000"

    def test_sweep_writes_table_and_figure(self, pipeline):
        out_dir = pipeline["root"] / "sweep"
        code = main(["sweep", "--config", str(pipeline["config"]),
                     "--manifest", str(pipeline["manifest"]),
                     "--features", str(pipeline["features"]),
                     "--sizes", "60,80", "--runs", "1", "--tasks", "8",
                     "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "sweep.json").exists()
        assert (out_dir / "sweep.csv").exists()
        assert (out_dir / "sweep.png").exists()
        header = (out_dir / "sweep.csv").read_text().splitlines()[0]
        assert header == "data_size,top1_mean,top1_se,top2_mean,top2_se"


class TestMine:
    def test_mine_fixture(self, tmp_path, capsys):
        out = tmp_path / "pairs.tsv"
        code = main(["mine", "--conllu", str(DATA / "wiki_sample.conllu"),
                     "--out", str(out),
                     "--object-whitelist", str(DATA / "objects_fixture.txt")])
        assert code == 0
        lines = out.read_text().splitlines()
        assert "wear\tsuit\t3" in lines

    def test_mine_missing_dir(self, tmp_path, capsys):
        code = main(["mine", "--conllu", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "o.tsv")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error_code: data:")


class TestGradcheckCommand:
    def test_prints_small_error_and_exits_zero(self, capsys):
        code = main(["gradcheck", "--seed", "7"])
        assert code == 0
        last = capsys.readouterr().out.strip().splitlines()[-1]
        assert last.startswith("max_relative_error:")
        assert float(last.split(":")[1]) < 1e-3


class TestDebugNorms:
    def test_norms_in_log(self, pipeline, tmp_path):
        log = tmp_path / "norms.log"
        code = main(["train", "--config", str(pipeline["config"]),
                     "--samples", str(pipeline["samples"]),
                     "--out", str(tmp_path / "m.ckpt"), "--log", str(log),
                     "--debug-norms", "--epochs", "1"])
        assert code == 0
        entry = json.loads(log.read_text().splitlines()[0])
        assert "norms" in entry
        assert "proj_weights" in entry["norms"]


class TestNumericalExitCode:
    def test_poisoned_samples_exit_three(self, pipeline, tmp_path, capsys):
        from verbground.dataset import load_samples, save_samples

        training_set = load_samples(pipeline["samples"])
        positive = next(s for s in training_set.samples if s.label == 1)
        positive.feature[0] = np.nan
        poisoned_path = tmp_path / "poisoned.bin"
        save_samples(training_set, poisoned_path)
        code = main(["train", "--config", str(pipeline["config"]),
                     "--samples", str(poisoned_path),
                     "--out", str(tmp_path / "m.ckpt")])
        assert code == 3
        assert capsys.readouterr().err.startswith("error_code: numerical:")


class TestUsageAndErrors:
    def test_unknown_subcommand_exits_one(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 1
        assert "error_code: usage:" in capsys.readouterr().err

    def test_missing_required_flag_exits_one(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["split", "--out", "x.json"])
        assert excinfo.value.code == 1

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["eval", "--help"])
        assert excinfo.value.code == 0
        help_text = capsys.readouterr().out
        for flag in ("--ckpt", "--manifest", "--pairs", "--features", "--mode",
                     "--runs", "--tasks", "--seed", "--out", "--no-figure"):
            assert flag in help_text

    def test_bad_checkpoint_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"NOTACKPT")
        code = main(["retrieve", "--ckpt", str(bad), "--features", str(bad),
                     "--command", "x"])
        assert code == 2
        assert capsys.readouterr().err.startswith("error_code: checkpoint:")

    def test_output_root_env(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("VERBGROUND_OUTPUT_ROOT", str(tmp_path))
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"n_verbs": 2, "n_classes": 4,
                                    "instances_per_class": 2, "dim": 8}))
        code = main(["synth", "--spec", str(spec), "--out", "nested/f.feat"])
        assert code == 0
        assert (tmp_path / "nested" / "f.feat").exists()
        assert read_feat(tmp_path / "nested" / "f.feat").dim == 8
