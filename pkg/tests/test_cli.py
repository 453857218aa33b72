import numpy as np
import pytest

from gestformer.checkpoint import load_checkpoint
from gestformer.cli import main, read_posteriors, write_posteriors
from gestformer.config import RunConfig, parse_assignments
from gestformer.errors import ConfigError
from gestformer.model import init_weights


def tree_bytes(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data"
    assert main(["gen-data", "--classes", "3", "--frames", "8", "--dim", "4", "--train", "18",
                 "--test", "9", "--seed", "2", "--out", str(out)]) == 0
    return out


def write_config(path, data, **extra):
    lines = [f"train_manifest={data / 'train.manifest'}", f"test_manifest={data / 'test.manifest'}",
             "k=8", "stages=1"] + [f"{k}={v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg_file = tmp_path / "c.txt"
        cfg_file.write_text("k=16\nseed=3\nlr=0.01\n")
        cfg = RunConfig.build(cfg_file, ["k=24"], seed=9)
        assert (cfg["k"], cfg["seed"], cfg["lr"], cfg["stages"]) == (24, 9, 0.01, 6)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'depth'"):
            parse_assignments(["depth=3"], "x")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="expected int"):
            parse_assignments(["k=eight"], "x")
        with pytest.raises(ConfigError, match="expected bool"):
            parse_assignments(["msp=maybe"], "x")

    def test_baseline_with_explicit_override(self):
        cfg = RunConfig.build(None, ["baseline=BL1", "gdfn=1"])
        assert (cfg["msp"], cfg["wcp"], cfg["gdfn"], cfg["embedding"]) == (False, False, True, False)

    def test_echo_round_trip(self, tmp_path):
        cfg = RunConfig.build(None, ["baseline=BL6", "lr=3e-4", "modality=ir"], seed=4)
        (tmp_path / "e.txt").write_text(cfg.to_text())
        again = RunConfig.build(tmp_path / "e.txt")
        assert again.values == cfg.values
        assert again.to_text() == cfg.to_text()

    def test_comments_and_blanks(self):
        assert parse_assignments(["# note", "", "k = 12  # width"], "x") == {"k": 12}


class TestGenData:
    def test_deterministic_trees(self, tmp_path):
        for name in ("a", "b"):
            assert main(["gen-data", "--classes", "3", "--frames", "40", "--seed", "7", "--train", "12",
                         "--test", "6", "--out", str(tmp_path / name)]) == 0
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_manifest_line_count(self, tmp_path):
        assert main(["gen-data", "--classes", "4", "--frames", "6", "--modalities", "2", "--train", "10",
                     "--test", "5", "--out", str(tmp_path)]) == 0
        assert len((tmp_path / "train.manifest").read_text().splitlines()) == 20
        assert len((tmp_path / "test.manifest").read_text().splitlines()) == 10

    def test_missing_required_flag(self, capsys):
        assert main(["gen-data", "--frames", "40"]) == 2
        assert "--classes" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["explode"]) == 2


class TestTrain:
    def test_zero_epochs_checkpoint_is_init(self, tmp_path, dataset):
        cfg = write_config(tmp_path / "c.txt", dataset, epochs=0)
        assert main(["train", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "r")]) == 0
        loaded = load_checkpoint(tmp_path / "r" / "checkpoint.mwpt")
        fresh = init_weights(loaded.config, 5)
        for name, tensor in fresh.parameters().items():
            assert tensor.data.tobytes() == loaded.parameters()[name].data.tobytes()
        assert len((tmp_path / "r" / "metrics.log").read_text().splitlines()) == 1

    def test_first_epoch_lowers_loss_on_noiseless_data(self, tmp_path):
        data = tmp_path / "clean"
        assert main(["gen-data", "--classes", "3", "--frames", "8", "--dim", "4", "--noise", "0",
                     "--train", "24", "--test", "6", "--out", str(data)]) == 0
        cfg = write_config(tmp_path / "c.txt", data, epochs=1)
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
        rows = [line.split(",") for line in (tmp_path / "r" / "metrics.log").read_text().splitlines()]
        assert [int(r[0]) for r in rows] == [0, 1]
        assert float(rows[1][1]) < float(rows[0][1])

    def test_config_echo_reproduces_run(self, tmp_path, dataset):
        cfg = write_config(tmp_path / "c.txt", dataset, epochs=2, baseline="BL5")
        assert main(["train", "--config", str(cfg), "--set", "lr=0.001", "--out", str(tmp_path / "a")]) == 0
        assert main(["train", "--config", str(tmp_path / "a" / "config.txt"), "--out", str(tmp_path / "b")]) == 0
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_missing_dataset(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(f"train_manifest={tmp_path / 'nope.manifest'}\n")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 3

    def test_unknown_key_exit_2(self, tmp_path, dataset):
        cfg = write_config(tmp_path / "c.txt", dataset)
        assert main(["train", "--config", str(cfg), "--set", "heads=4"]) == 2

    def test_shape_mismatch_is_config_error(self, tmp_path, dataset):
        cfg = write_config(tmp_path / "c.txt", dataset, m=9)
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2

    def test_nan_aborts_with_exit_4(self, tmp_path, dataset, capsys):
        cfg = write_config(tmp_path / "c.txt", dataset, epochs=1, lr=1e300)
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 4
        assert "first bad parameter" in capsys.readouterr().err


class TestEval:
    @pytest.fixture
    def trained(self, tmp_path, dataset):
        cfg = write_config(tmp_path / "c.txt", dataset, epochs=1)
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
        return tmp_path / "r" / "checkpoint.mwpt"

    def test_confusion_rows_and_determinism(self, trained, dataset, tmp_path, capsys):
        args = ["eval", "--checkpoint", str(trained), "--manifest", str(dataset / "test.manifest")]
        assert main(args + ["--out", str(tmp_path / "e1")]) == 0
        first = capsys.readouterr().out
        assert main(args + ["--out", str(tmp_path / "e2")]) == 0
        second = capsys.readouterr().out
        assert first.replace("e1", "e2") == second
        assert (tmp_path / "e1" / "posteriors.csv").read_bytes() == (tmp_path / "e2" / "posteriors.csv").read_bytes()
        table = [line.split() for line in first.splitlines()[2:5]]
        assert [sum(map(int, row[1:])) for row in table] == [3, 3, 3]

    def test_shape_mismatch_exit_2(self, trained, tmp_path):
        other = tmp_path / "other"
        assert main(["gen-data", "--classes", "3", "--frames", "10", "--dim", "4", "--train", "3",
                     "--test", "3", "--out", str(other)]) == 0
        assert main(["eval", "--checkpoint", str(trained), "--manifest", str(other / "test.manifest")]) == 2

    def test_corrupt_checkpoint_exit_3(self, trained, dataset):
        trained.write_bytes(b"junk" + trained.read_bytes()[4:])
        assert main(["eval", "--checkpoint", str(trained), "--manifest", str(dataset / "test.manifest")]) == 3

    @pytest.mark.slow
    def test_memorises_tiny_training_set(self, tmp_path, capsys):
        data = tmp_path / "tiny"
        assert main(["gen-data", "--classes", "3", "--frames", "8", "--dim", "4", "--noise", "1.0",
                     "--train", "9", "--test", "3", "--seed", "3", "--out", str(data)]) == 0
        cfg = write_config(tmp_path / "c.txt", data, epochs=150, lr=0.003, batch_size=3)
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
        capsys.readouterr()
        assert main(["eval", "--checkpoint", str(tmp_path / "r" / "checkpoint.mwpt"),
                     "--manifest", str(data / "train.manifest")]) == 0
        assert "accuracy = 1.000000 (9/9)" in capsys.readouterr().out


class TestFuse:
    def _write(self, path, ids, labels, probs):
        write_posteriors(path, ids, np.array(labels), np.array(probs, dtype=float))
        return str(path)

    def test_hand_built_files(self, tmp_path, capsys):
        ids = ["s0", "s1", "s2"]
        labels = [0, 1, 1]
        a = self._write(tmp_path / "color.csv", ids, labels, [[0.6, 0.4], [0.6, 0.4], [0.2, 0.8]])
        b = self._write(tmp_path / "depth.csv", ids, labels, [[0.3, 0.7], [0.3, 0.7], [0.5, 0.5]])
        # color predicts 0,0,1; depth predicts 1,1,0 (0.5/0.5 tie -> 0)
        # sums: [0.9,1.1] -> 1, [0.9,1.1] -> 1, [0.7,1.3] -> 1
        assert main(["fuse", a, b, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "color: accuracy = 0.666667" in out
        assert "depth: accuracy = 0.333333" in out
        assert "fused: accuracy = 0.666667" in out
        rows = (tmp_path / "fused.csv").read_text().splitlines()[1:]
        assert [r.split(",")[2] for r in rows] == ["1", "1", "1"]

    def test_self_fusion_is_idempotent(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        probs = rng.dirichlet(np.ones(4), size=10)
        labels = rng.integers(0, 4, size=10)
        a = self._write(tmp_path / "m.csv", [f"s{i}" for i in range(10)], labels, probs)
        assert main(["fuse", a, a]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split("=")[1] == lines[-1].split("=")[1]

    def test_order_invariant(self, tmp_path):
        rng = np.random.default_rng(1)
        ids = [f"s{i}" for i in range(12)]
        labels = rng.integers(0, 3, size=12)
        files = [self._write(tmp_path / f"m{j}.csv", ids, labels, rng.dirichlet(np.ones(3), size=12))
                 for j in range(3)]
        assert main(["fuse", *files, "--out", str(tmp_path / "f1")]) == 0
        assert main(["fuse", *files[::-1], "--out", str(tmp_path / "f2")]) == 0
        assert (tmp_path / "f1" / "fused.csv").read_bytes() == (tmp_path / "f2" / "fused.csv").read_bytes()

    def test_misaligned_ids(self, tmp_path, capsys):
        a = self._write(tmp_path / "a.csv", ["s0", "s1"], [0, 1], [[1, 0], [0, 1]])
        b = self._write(tmp_path / "b.csv", ["s0", "s9"], [0, 1], [[1, 0], [0, 1]])
        assert main(["fuse", a, b]) == 3
        assert "row 2" in capsys.readouterr().err

    def test_posterior_file_round_trip(self, tmp_path):
        probs = np.random.default_rng(2).dirichlet(np.ones(5), size=4)
        write_posteriors(tmp_path / "p.csv", ["a", "b", "c", "d"], np.arange(4), probs)
        ids, labels, back = read_posteriors(tmp_path / "p.csv")
        assert ids == ["a", "b", "c", "d"]
        assert np.array_equal(back, probs)


class TestGradcheckAndBench:
    def test_gradcheck_reports_every_case(self, capsys):
        code = main(["gradcheck"])
        out = capsys.readouterr().out
        for name in ("wcp", "msp", "gdfn", "mwpt_stage", "model"):
            assert any(line.split()[0] == name for line in out.splitlines())
        failed = [line for line in out.splitlines() if line.endswith("FAIL")]
        assert code == (4 if failed else 0)

    def test_gradcheck_small_config_exit_code(self, capsys):
        code = main(["gradcheck", "--set", "stages=1", "--seed", "3"])
        out = capsys.readouterr().out
        assert code == (4 if "FAIL" in out else 0)

    def test_bench_totals_and_doubling(self, capsys):
        assert main(["bench", "--set", "m=20", "--set", "stages=2"]) == 0
        first = capsys.readouterr().out
        assert main(["bench", "--set", "m=40", "--set", "stages=2"]) == 0
        second = capsys.readouterr().out

        def section(text, header):
            body = text.split(header)[1].split("#")[0]
            return dict(line.split(" = ") for line in body.strip().splitlines())

        for text in (first, second):
            for header in ("# parameters", "# multiply-accumulates per sequence"):
                rows = section(text, header)
                total = int(rows.pop("total"))
                rows.pop("conv", None)
                rows.pop("dense", None)
                assert total == sum(int(v) for v in rows.values())
        conv1 = int(section(first, "# multiply-accumulates per sequence")["conv"])
        conv2 = int(section(second, "# multiply-accumulates per sequence")["conv"])
        assert conv2 == 2 * conv1

    def test_bench_kernel_timings(self, capsys):
        assert main(["bench", "--set", "stages=1", "--kernels", "--repeat", "1"]) == 0
        assert "dwconv2d_forward" in capsys.readouterr().out
