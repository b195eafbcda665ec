import json

import numpy as np
import pytest

from fstcbdg import fileio
from fstcbdg.cli import main
from fstcbdg.partition import PartitionMap


@pytest.fixture()
def world_dir(tmp_path):
    out = tmp_path / "world"
    rc = main([
        "gen-synth", "--classes", "6", "--dim", "16", "--per-class", "30",
        "--test-per-class", "10", "--noise", "0.3", "--seed", "1",
        "--out", str(out),
    ])
    assert rc == 0
    return out


def write_run_config(tmp_path, world, **overrides):
    doc = {
        "train": {"rounds": 2, "participation": 1.0, "batch_size": 32, "seed": 3},
        "data": {
            "train_features": str(world / "train.fedf"),
            "test_features": str(world / "test.fedf"),
            "prototypes": str(world / "prototypes.fedf"),
            "class_names": str(world / "class_names.json"),
        },
        "partition": {"strategy": "iid", "n_clients": 4},
        "output": {"dir": str(tmp_path / "out")},
    }
    doc.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return path


class TestGenSynth:
    def test_outputs_exist_and_parse(self, world_dir):
        feats, labels, normalized = fileio.read_features(world_dir / "train.fedf")
        assert feats.shape == (180, 16)
        assert labels is not None and normalized
        protos, _, _ = fileio.read_features(world_dir / "prototypes.fedf")
        assert protos.shape == (6, 16)
        names = fileio.read_class_names(world_dir / "class_names.json")
        assert len(names) == 6
        world = json.loads((world_dir / "world.json").read_text())
        assert world["num_classes"] == 6


class TestPartitionCommand:
    def test_manifest_written(self, world_dir, tmp_path):
        out = tmp_path / "part.json"
        rc = main([
            "partition", "--features", str(world_dir / "train.fedf"),
            "--strategy", "sharding", "--clients", "6", "--s", "2",
            "--seed", "0", "--out", str(out),
        ])
        assert rc == 0
        pmap = PartitionMap.load(out)
        pmap.validate_cover(180)
        assert pmap.strategy_tag == "sharding(s=2)"

    def test_lda_strategy(self, world_dir, tmp_path):
        out = tmp_path / "part.json"
        rc = main([
            "partition", "--features", str(world_dir / "train.fedf"),
            "--strategy", "lda", "--clients", "5", "--alpha", "0.5",
            "--seed", "2", "--out", str(out),
        ])
        assert rc == 0
        PartitionMap.load(out).validate_cover(180)


class TestRunCommand:
    def test_fst_cbdg_run(self, world_dir, tmp_path):
        config = write_run_config(tmp_path, world_dir)
        assert main(["run", "--config", str(config)]) == 0
        out = tmp_path / "out"
        metrics = fileio.read_metrics(out / "metrics.csv")
        assert [m.round for m in metrics] == [0, 1, 2]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["algorithm"] == "fst-cbdg"
        assert manifest["kernel_backend"] in ("cython", "numpy")
        assert (out / "partition.json").exists()

    def test_supervised_baseline(self, world_dir, tmp_path):
        config = write_run_config(tmp_path, world_dir, algorithm="supervised-fedavg")
        assert main(["run", "--config", str(config)]) == 0
        metrics = fileio.read_metrics(tmp_path / "out" / "metrics.csv")
        assert metrics[0].pseudo_label_accuracy == 1.0

    def test_centralized_probe(self, world_dir, tmp_path):
        config = write_run_config(tmp_path, world_dir, algorithm="centralized-probe")
        assert main(["run", "--config", str(config)]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert "final_accuracy" in manifest["results"]

    def test_seed_override_changes_run(self, world_dir, tmp_path):
        config = write_run_config(tmp_path, world_dir)
        main(["run", "--config", str(config), "--out", str(tmp_path / "a"),
              "--seed", "1"])
        main(["run", "--config", str(config), "--out", str(tmp_path / "b"),
              "--seed", "2"])
        a = json.loads((tmp_path / "a" / "manifest.json").read_text())
        b = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert a["train"]["seed"] == 1 and b["train"]["seed"] == 2

    def test_missing_config_is_clean_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


class TestEvalCommands:
    def test_eval_zeroshot(self, world_dir, capsys):
        rc = main([
            "eval-zeroshot", "--features", str(world_dir / "test.fedf"),
            "--prototypes", str(world_dir / "prototypes.fedf"),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "zero-shot accuracy" in out

    def test_entropy_report(self, world_dir, tmp_path):
        out = tmp_path / "entropy.csv"
        rc = main([
            "entropy-report", "--features", str(world_dir / "test.fedf"),
            "--prototypes", str(world_dir / "prototypes.fedf"),
            "--out", str(out),
        ])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "sample_index,entropy"
        assert len(lines) == 61


class TestAblateCommand:
    def test_sweep_tables(self, world_dir, tmp_path):
        config = write_run_config(tmp_path, world_dir)
        rc = main(["ablate", "--config", str(config), "--seeds", "0", "1",
                   "--out", str(tmp_path / "ab")])
        assert rc == 0
        sampling = (tmp_path / "ab" / "ablation_sampling.csv").read_text().splitlines()
        losses = (tmp_path / "ab" / "ablation_losses.csv").read_text().splitlines()
        assert sampling[0] == "seed,balanced,equal"
        assert losses[0] == "seed,both,self_train,synth"
        assert len(sampling) == 3 and len(losses) == 3
