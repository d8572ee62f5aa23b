"""Adapter command-line behavior."""

import torch

from tsealadapt import TinyCNN, save_manifest, tinycnn_manifest
from tsealadapt.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, run
from tsealadapt.container_io import read_container


def _saved_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    save_manifest(tinycnn_manifest(owner="cli"), path)
    return path


def test_export_subcommand(tmp_path, checkpoint, capsys):
    out = tmp_path / "cli.tseal"
    code = run(["export", "--checkpoint", str(checkpoint),
                "--manifest", str(_saved_manifest(tmp_path)),
                "--out", str(out)])
    assert code == EXIT_OK
    assert "exported" in capsys.readouterr().out
    assert len(read_container(out).tensors) == 8


def test_pretrain_and_finetune_subcommands(tmp_path):
    ckpt = tmp_path / "pre.pt"
    assert run(["pretrain", "--out", str(ckpt), "--epochs", "1"]) == EXIT_OK
    tuned = tmp_path / "tuned.pt"
    assert run(["finetune", "--checkpoint", str(ckpt), "--lr", "0.001",
                "--epochs", "1", "--out", str(tuned)]) == EXIT_OK
    model = TinyCNN()
    model.load_state_dict(torch.load(tuned, weights_only=True))


def test_missing_checkpoint_fails_cleanly(tmp_path, capsys):
    code = run(["export", "--checkpoint", str(tmp_path / "nope.pt"),
                "--manifest", str(_saved_manifest(tmp_path)),
                "--out", str(tmp_path / "x.tseal")])
    assert code == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_unmapped_tensor_fails_cleanly(tmp_path, checkpoint, capsys):
    bad = tmp_path / "bad.json"
    manifest = tinycnn_manifest()
    trimmed = {k: v for k, v in manifest.name_map.items() if k != "conv1.bias"}
    save_manifest(type(manifest)(
        framework="torch", framework_version="x", name_map=trimmed,
        output_layer="fc2_weight"), bad)
    code = run(["export", "--checkpoint", str(checkpoint),
                "--manifest", str(bad), "--out", str(tmp_path / "x.tseal")])
    assert code == EXIT_ERROR
    assert "not covered" in capsys.readouterr().err


def test_no_arguments_is_usage_error():
    assert run([]) == EXIT_USAGE


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == EXIT_OK
    assert "export" in capsys.readouterr().out
