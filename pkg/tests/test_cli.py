import json

import numpy as np
import pytest

from advsurv import cli

SYNTH_TOML = """
seed = 5
out = "{out}"

[data]
fractions = [0.8, 0.1, 0.1]

[data.synthetic]
n = 240
p = 2
beta = [0.8, -0.5]
family = "lognormal"
sigma = 0.4
censoring = "exponential"
censor_fraction = 0.3

[model]
kind = "{kind}"
hidden = [6]

[train]
epochs = 3
batch_size = 64
validation_samples = 6

[eval]
sample_count = 25
dump_samples = true
"""


def write_config(tmp_path, kind="date", name="run.toml"):
    out = tmp_path / "out"
    text = SYNTH_TOML.format(out=out.as_posix(), kind=kind)
    if kind == "coxph":
        # neural-only fields are invalid for coxph
        text = text.replace("hidden = [6]", "penalty = 1e-4")
        text = text.replace("validation_samples = 6", "")
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path, out


def run_cli(*argv):
    return cli.main(list(argv))


class TestValidation:
    def check_error(self, tmp_path, mutate, command="train", match=""):
        path, _ = write_config(tmp_path)
        cfg = cli.load_config(path)
        mutate(cfg)
        with pytest.raises(cli.ConfigError, match=match):
            cli.validate_config(cfg, command)

    def test_unknown_field_named(self, tmp_path):
        self.check_error(tmp_path, lambda c: c["train"].update(warmup=5), match=r"\[train\].warmup")

    def test_out_of_domain_value_named(self, tmp_path):
        self.check_error(
            tmp_path,
            lambda c: c["train"].update(learning_rate=-1.0),
            match=r"\[train\].learning_rate",
        )

    def test_bad_model_kind(self, tmp_path):
        self.check_error(tmp_path, lambda c: c["model"].update(kind="forest"), match="kind")

    def test_model_specific_field_rejected_for_other_kind(self, tmp_path):
        self.check_error(tmp_path, lambda c: c["model"].update(eta=1.0), match=r"\[model\].eta")

    def test_two_sources_rejected(self, tmp_path):
        self.check_error(
            tmp_path,
            lambda c: c["data"].update(csv="x.csv", schema="s.json"),
            command="synth",
            match="exactly one dataset source",
        )

    def test_bad_fractions(self, tmp_path):
        self.check_error(
            tmp_path,
            lambda c: c["data"].update(fractions=[0.5, 0.2, 0.2]),
            match=r"\[data\].fractions",
        )

    def test_missing_csv_for_prepare(self, tmp_path):
        path, _ = write_config(tmp_path)
        cfg = cli.load_config(path)
        with pytest.raises(cli.ConfigError, match="prepare requires"):
            cli.validate_config(cfg, "prepare")


class TestPipeline:
    @pytest.mark.parametrize("kind", ["date", "draft", "coxph"])
    def test_synth_train_evaluate(self, tmp_path, kind):
        config, out = write_config(tmp_path, kind=kind)
        assert run_cli("synth", "--config", str(config)) == 0
        assert (out / "dataset" / "manifest.json").exists()
        assert run_cli("train", "--config", str(config)) == 0
        ckpt = out / "checkpoint.ndn"
        assert ckpt.exists()
        log_lines = [
            json.loads(line)
            for line in (out / "train_log.jsonl").read_text().strip().splitlines()
        ]
        if kind == "coxph":
            assert log_lines[0]["converged"]
        else:
            assert "best_epoch" in log_lines[-1]
            scores = [e["validation_metric"] for e in log_lines if "validation_metric" in e]
            assert min(scores) <= scores[0]
        assert run_cli("evaluate", "--config", str(config), "--checkpoint", str(ckpt)) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert 0.0 <= report["ci"] <= 1.0
        if kind != "coxph":
            manifest = json.loads((out / "dataset" / "manifest.json").read_text())
            dump = (out / "samples.csv").read_text().strip().splitlines()
            assert len(dump) - 1 == manifest["split_counts"]["test"]
            assert dump[0].split(",")[:4] == ["record", "t", "l", "t_hat"]

    def test_evaluate_is_byte_deterministic(self, tmp_path):
        config, out = write_config(tmp_path)
        run_cli("synth", "--config", str(config))
        run_cli("train", "--config", str(config))
        ckpt = str(out / "checkpoint.ndn")
        run_cli("evaluate", "--config", str(config), "--checkpoint", ckpt)
        first = (out / "metrics.json").read_bytes()
        run_cli("evaluate", "--config", str(config), "--checkpoint", ckpt)
        assert (out / "metrics.json").read_bytes() == first

    def test_full_pipeline_reruns_identically(self, tmp_path):
        config, out = write_config(tmp_path)
        blobs = []
        for _ in range(2):
            run_cli("synth", "--config", str(config))
            run_cli("train", "--config", str(config))
            run_cli(
                "evaluate", "--config", str(config), "--checkpoint", str(out / "checkpoint.ndn")
            )
            blobs.append(
                (
                    (out / "metrics.json").read_bytes(),
                    (out / "checkpoint.ndn").read_bytes(),
                    (out / "samples.csv").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1]

    def test_synth_split_counts_follow_fractions(self, tmp_path):
        config, out = write_config(tmp_path)
        text = config.read_text().replace("n = 240", "n = 1000")
        config.write_text(text, encoding="utf-8")
        run_cli("synth", "--config", str(config))
        manifest = json.loads((out / "dataset" / "manifest.json").read_text())
        assert manifest["split_counts"] == {"train": 800, "validation": 100, "test": 100}

    def test_seed_flag_overrides_config(self, tmp_path):
        config, out = write_config(tmp_path)
        run_cli("synth", "--config", str(config))
        base = (out / "dataset" / "t.npy").read_bytes()
        run_cli("synth", "--config", str(config), "--seed", "99")
        assert (out / "dataset" / "t.npy").read_bytes() != base

    def test_hash_mismatch_rejected(self, tmp_path):
        config, out = write_config(tmp_path)
        run_cli("synth", "--config", str(config))
        run_cli("train", "--config", str(config))
        # regenerate the dataset with a different encoding (extra feature)
        wider = tmp_path / "wider.toml"
        wider.write_text(
            config.read_text().replace("p = 2", "p = 3").replace(
                "beta = [0.8, -0.5]", "beta = [0.8, -0.5, 0.1]"
            ),
            encoding="utf-8",
        )
        run_cli("synth", "--config", str(wider))
        code = run_cli(
            "evaluate", "--config", str(wider), "--checkpoint", str(out / "checkpoint.ndn")
        )
        assert code == 2

    def test_model_flag_overrides_kind(self, tmp_path):
        config, out = write_config(tmp_path, kind="date")
        run_cli("synth", "--config", str(config))
        assert run_cli("train", "--config", str(config), "--model", "coxph") == 0
        from advsurv.ndnet import load_arrays

        _, meta = load_arrays(out / "checkpoint.ndn")
        assert meta["model"] == "coxph"

    def test_train_without_artifact_fails_cleanly(self, tmp_path):
        config, _ = write_config(tmp_path)
        assert run_cli("train", "--config", str(config)) == 2


class TestPrepare:
    def test_prepare_from_csv(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = ["futime,death,age,sex"]
        for i in range(120):
            rows.append(
                f"{rng.uniform(10, 5000):.1f},{int(rng.uniform() < 0.3)},"
                f"{rng.uniform(40, 90):.1f},{'F' if i % 2 else 'M'}"
            )
        csv = tmp_path / "toy.csv"
        csv.write_text("\n".join(rows) + "\n", encoding="utf-8")
        schema = tmp_path / "schema.json"
        schema.write_text(
            json.dumps(
                {
                    "time_column": "futime",
                    "event_column": "death",
                    "features": {"age": "continuous", "sex": "categorical"},
                    "time_unit": "days",
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "out"
        config = tmp_path / "prep.toml"
        config.write_text(
            f'seed = 3\nout = "{out.as_posix()}"\n\n[data]\ncsv = "{csv.as_posix()}"\n'
            f'schema = "{schema.as_posix()}"\n',
            encoding="utf-8",
        )
        assert run_cli("prepare", "--config", str(config)) == 0
        manifest = json.loads((out / "dataset" / "manifest.json").read_text())
        assert manifest["n"] == 120
        assert manifest["p"] == 3  # age + two sex levels
        # rerun produces byte-identical artifacts
        first = (out / "dataset" / "X.npy").read_bytes()
        assert run_cli("prepare", "--config", str(config)) == 0
        assert (out / "dataset" / "X.npy").read_bytes() == first
