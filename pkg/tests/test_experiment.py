import json

import pandas as pd
import pytest

from deepradar.cli.experiment import main, setup_parser

TINY_TRAIN_CONFIG = """\
architecture.raster_channels = 2,3
architecture.object_channels = 3,2
architecture.encoder_hidden = 8
architecture.d_x = 6
architecture.d_z = 3
architecture.decoder_hidden = 8
architecture.decoder_channels = 3,2
architecture.recognition_hidden = 8
architecture.discriminator_channels = 2,2
architecture.gmm_components = 2
batch_size = 4
"""


@pytest.fixture
def tiny_argv(tmp_path):
    train_config = tmp_path / "train.conf"
    train_config.write_text(TINY_TRAIN_CONFIG)
    return ["--workdir", str(tmp_path / "run"), "--frames", "16", "--seeds", "0,1", "--epochs", "1",
            "--set", "grid.n_range=8", "--set", "grid.n_azimuth=8", "--train-config", str(train_config)]


def test_parser_defaults():
    args = setup_parser().parse_args(["--workdir", "w"])
    assert args.frames == 5000
    assert args.seeds == [0, 1, 2]
    assert args.variants == ["normal", "vae", "vae-mixed"]


def test_bad_seed_list_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        setup_parser().parse_args(["--workdir", "w", "--seeds", "0,x"])
    assert info.value.code == 2


def test_unknown_variant_is_a_config_error(tmp_path, caplog):
    assert main(["--workdir", str(tmp_path), "--variants", "normal,transformer"]) == 2
    assert "transformer" in caplog.text
    assert not (tmp_path / "frames.drsd").exists()


def test_failed_step_keeps_its_exit_code(tmp_path):
    assert main(["--workdir", str(tmp_path), "--frames", "4", "--set", "clutter_rte=3"]) == 2


@pytest.mark.slow
def test_runs_every_variant_and_seed(tmp_path, tiny_argv, capsys):
    assert main(tiny_argv) == 0
    workdir = tmp_path / "run"
    assert sorted(p.name for p in (workdir / "reports").iterdir()) == [
        "normal_seed0.json", "normal_seed1.json",
        "vae-mixed_seed0.json", "vae-mixed_seed1.json",
        "vae_seed0.json", "vae_seed1.json",
    ]
    summary = pd.read_csv(workdir / "summary.csv", index_col="variant")
    assert sorted(summary.index) == ["normal", "vae", "vae_mixed"]
    assert summary["runs"].tolist() == [2, 2, 2]
    checks = json.loads((workdir / "checks.json").read_text())
    assert {"rmse vae_mixed < normal", "rmse vae_mixed <= vae", "vae under-predicts p0"} <= set(checks)
    assert "angle bins normal >= 5" in capsys.readouterr().out

    # a resumed run reuses every artifact
    before = (workdir / "models" / "vae_seed1.drsm").stat().st_mtime_ns
    assert main([*tiny_argv, "--resume"]) == 0
    assert (workdir / "models" / "vae_seed1.drsm").stat().st_mtime_ns == before
