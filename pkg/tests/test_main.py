import json
import shutil

import pandas as pd
import pytest

import main
from dsp.audio import write_wav
from tests.conftest import synthetic_speech


def write_config(tmp_path, clean_dir, workdir, **extra):
    config = {
        "clean_dir": str(clean_dir),
        "workdir": str(workdir),
        "seed": 3,
        "fir_p": 2,
        "fir_q": 2,
        "context_grid": [[0, 0], [1, 1], [2, 0], [0, 2]],
        "enhancer_p": 2,
        "mlp_p": 1,
        "mlp_q": 1,
        "hidden": 8,
        "n_hidden": 1,
        "epochs": 2,
        "batch_size": 64,
        "lambda_grid": [0.0, 0.5, 1.0],
        "max_lag": 20,
        "export_format": "csv",
    }
    config.update(extra)
    path = tmp_path / f"{workdir.name}.json"
    path.write_text(json.dumps(config))
    return str(path)


def test_all_commands_registered():

    parser = main.build_parser()

    command_functions = [func for func in dir(main) if func.startswith("cmd_")]

    for func in command_functions:
        assert getattr(main, func) in main.COMMANDS.values(), f"{func} should be registered but it's not"
    for name in main.COMMANDS:
        assert parser.parse_args([name]).command == name, f"{name} has no subcommand"


@pytest.mark.slow
def test_full_pipeline(tmp_path, clean_dir):
    workdir = tmp_path / "work"
    config = write_config(tmp_path, clean_dir, workdir)

    for command in main.COMMANDS:
        assert main.main([command, "--config", config]) == 0, f"{command} failed"

    manifest = pd.read_csv(workdir / "manifest.csv")
    assert len(manifest) == 5
    assert set(manifest["split"]) == {"train", "dev", "test"}
    assert manifest["rir_id"].is_unique

    reports = workdir / "reports"
    for name in ("fir_errors", "context_sweep", "context_sweep_errors", "mlp_loss_trace",
                 "derev_mse", "reverb_mse", "mix_sweep", "mix_summary", "autocorr", "autocorr_tail"):
        assert (reports / f"{name}.csv").exists(), f"{name}.csv missing"

    fir_errors = pd.read_csv(reports / "fir_errors.csv")
    assert (fir_errors["err"] < fir_errors["baseline_err"]).all()

    summary = pd.read_csv(reports / "mix_summary.csv")
    assert sorted(summary["config"].unique()) == [1, 2, 3, 4]
    assert "average" in set(summary["subset"])

    assert (workdir / "models" / "mlp.json").exists()
    record = json.loads((workdir / "runs" / "diagnose.json").read_text())
    assert record["seed"] == 3 and record["command"] == "diagnose"


@pytest.mark.slow
def test_identical_reruns(tmp_path, clean_dir):
    outputs = []
    for name in ("first", "second"):
        workdir = tmp_path / name
        config = write_config(tmp_path, clean_dir, workdir)
        for command in main.COMMANDS:
            assert main.main([command, "--config", config]) == 0, f"{command} failed"
        outputs.append(workdir)

    first, second = outputs
    compared = sorted(
        str(path.relative_to(first))
        for pattern in ("manifest.csv", "reverb/*.wav", "features/*.ncft", "models/mlp.json", "reports/*.csv")
        for path in first.glob(pattern)
    )
    assert "reports/autocorr_tail.csv" in compared and "reports/derev_mse.csv" in compared
    assert any(name.endswith(".derev_of_reverb.ncft") for name in compared)

    for relative in compared:
        assert (first / relative).read_bytes() == (second / relative).read_bytes(), f"{relative} differs"


def test_flat_mix_sweep_keeps_lambda_zero(tmp_path, clean_dir):
    workdir = tmp_path / "work"
    config = write_config(tmp_path, clean_dir, workdir, mix_configs=[4])
    for command in ("make-corpus", "featurize", "train-mlp", "derev"):
        assert main.main([command, "--config", config]) == 0

    features = workdir / "features"
    for path in features.glob("*.reverb.ncft"):
        shutil.copy(path, features / path.name.replace(".reverb.", ".derev_of_reverb."))

    assert main.main(["mix-sweep", "--config", config]) == 0
    summary = pd.read_csv(workdir / "reports" / "mix_summary.csv")
    assert (summary["optimal_lambda"] == 0.0).all()


def test_too_few_rirs_is_a_data_error(tmp_path):
    clean_dir = tmp_path / "clean"
    for i in range(10):
        write_wav(synthetic_speech(seed=i, seconds=0.5), clean_dir / f"utt_{i:03d}.wav")

    config = write_config(tmp_path, clean_dir, tmp_path / "work", rir_count=5)
    assert main.main(["make-corpus", "--config", config]) == 3


def test_missing_upstream_artifact(tmp_path, clean_dir, caplog):
    config = write_config(tmp_path, clean_dir, tmp_path / "empty")
    assert main.main(["fit-fir", "--config", config]) == 3
    assert "run 'make-corpus' first" in caplog.text


@pytest.mark.parametrize("extra", [{"no_such_key": 1}, {"jobs": 0}, {"ridge": -1.0}])
def test_bad_config_exits_with_2(tmp_path, clean_dir, extra):
    config = write_config(tmp_path, clean_dir, tmp_path / "work", **extra)
    assert main.main(["make-corpus", "--config", config]) == 2


def test_cli_flags_override_the_config_file(tmp_path, clean_dir):
    config = write_config(tmp_path, clean_dir, tmp_path / "work")
    assert main.main(["make-corpus", "--config", config, "--seed", "8", "--workdir", str(tmp_path / "flags")]) == 0

    record = json.loads((tmp_path / "flags" / "runs" / "make-corpus.json").read_text())
    assert record["seed"] == 8
    assert not (tmp_path / "work").exists()


def test_log_level_covers_config_resolution(tmp_path, clean_dir, caplog):
    config = write_config(tmp_path, clean_dir, tmp_path / "empty")
    assert main.main(["fit-fir", "--config", config, "--log-level", "DEBUG"]) == 3
    assert f"Reading config {config}" in caplog.text


@pytest.mark.slow
def test_default_diagnose_orders_the_tails(tmp_path):
    clean_dir = tmp_path / "clean"
    for i in range(6):
        write_wav(synthetic_speech(seed=40 + i, seconds=2.0), clean_dir / f"utt_{i:03d}.wav")
    config = tmp_path / "defaults.json"
    config.write_text(json.dumps({"clean_dir": str(clean_dir), "workdir": str(tmp_path / "work"), "seed": 1}))

    for command in ("make-corpus", "fit-fir", "diagnose"):
        assert main.main([command, "--config", str(config)]) == 0, f"{command} failed"

    tails = pd.read_csv(tmp_path / "work" / "reports" / "autocorr_tail.csv").set_index("condition")["tail_mass"]
    assert tails["reverb"] > tails["clean"]
    assert tails["reverb"] > tails["fir_derev"]
