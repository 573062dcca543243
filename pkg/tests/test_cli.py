import json
from pathlib import Path


from scorerec.cli import run_command

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "planted.toml"
STAGES = ["ingest", "split", "train-crm", "train-car", "index", "assess", "train-sare", "predict", "evaluate"]


def base_args(tmp):
    return [
        "--config", str(CONFIG),
        "--set", f"interactions={ROOT / 'data/planted/interactions.tsv'}",
        "--set", f"metadata={ROOT / 'data/planted/items.tsv'}",
        "--set", f"artifacts_dir={tmp}",
        "--set", "crm_epochs=20",
        "--set", "car_epochs=10",
        "--set", "sare_epochs=10",
    ]


def test_help_exits_zero(capsys):
    assert run_command(["--help"]) == 0
    assert "train-sare" in capsys.readouterr().out


def test_unknown_subcommand_exits_two(capsys):
    assert run_command(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_every_subcommand_takes_common_flags(capsys):
    for stage in STAGES:
        assert run_command([stage, "--help"]) == 0
        out = capsys.readouterr().out
        for flag in ("--seed", "--config", "--out"):
            assert flag in out


def test_missing_input_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.tsv"
    code = run_command(["ingest", "--set", f"interactions={missing}", "--set", f"metadata={missing}"])
    assert code == 1
    assert str(missing) in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert run_command(["split", "--config", str(tmp_path / "c.toml")]) == 1
    assert "c.toml" in capsys.readouterr().err


def test_validation_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[car]\ntau_car = 0\n")
    assert run_command(["train-car", "--config", str(cfg)]) == 1
    assert "tau_car" in capsys.readouterr().err


def test_full_stub_pipeline(tmp_path, capsys):
    args = base_args(tmp_path)
    for stage in STAGES[:-1]:
        assert run_command([stage, *args]) == 0, stage
    report = tmp_path / "out" / "report.json"
    assert run_command(["evaluate", *args, "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    assert set(data) == {"auc", "uauc", "n_pairs", "n_users_evaluated", "n_users_skipped", "config_digest", "seed"}
    assert 0.0 <= data["auc"] <= 1.0
    # the report is also echoed on stdout
    assert json.loads(capsys.readouterr().out) == data


def test_out_and_seed_flags(tmp_path):
    args = base_args(tmp_path)
    assert run_command(["ingest", *args, "--out", str(tmp_path / "corpus2")]) == 0
    assert (tmp_path / "corpus2" / "interactions.tsv").exists()
    args += ["--set", f"corpus_dir={tmp_path / 'corpus2'}"]
    assert run_command(["split", *args]) == 0
    assert run_command(["train-crm", *args, "--seed", "3", "--out", str(tmp_path / "a.bin")]) == 0
    assert run_command(["train-crm", *args, "--seed", "4", "--out", str(tmp_path / "b.bin")]) == 0
    assert (tmp_path / "a.bin").read_bytes() != (tmp_path / "b.bin").read_bytes()


def test_inputs_not_mutated(tmp_path):
    src = ROOT / "data/planted/interactions.tsv"
    before = src.read_bytes()
    assert run_command(["ingest", *base_args(tmp_path)]) == 0
    assert src.read_bytes() == before
