"""End-to-end check: a sealed checkpoint survives the framework round
trip untouched, and one epoch of fine-tuning breaks the seal.

The sealing tool only ever runs as a subprocess here; container files
are the sole exchange between the two packages.
"""

import torch

from tsealadapt import (TinyCNN, export_checkpoint, export_state,
                        finetune_attack, import_container, make_dataset,
                        pretrain, tinycnn_manifest)

from conftest import seal_cli


def _agreement(state_a, state_b) -> float:
    x, _ = make_dataset(seed=123)
    preds = []
    for state in (state_a, state_b):
        model = TinyCNN()
        model.load_state_dict(state)
        model.eval()
        with torch.no_grad():
            preds.append(model(x).argmax(dim=1))
    return (preds[0] == preds[1]).float().mean().item()


def test_finetune_is_detected_and_untouched_models_pass(tmp_path):
    ckpt = tmp_path / "pretrained.pt"
    pretrain(ckpt)
    manifest = tinycnn_manifest(owner="e2e", model_name="tinycnn",
                                model_version="1")

    plain = tmp_path / "plain.tseal"
    export_checkpoint(ckpt, manifest, plain)

    key = tmp_path / "key.hex"
    assert seal_cli("keygen", "--out", str(key)).returncode == 0
    marked = tmp_path / "marked.tseal"
    embed = seal_cli("embed", "--model", str(plain), "--key", str(key),
                     "--out", str(marked), "--secret", "release-2026-08")
    assert embed.returncode == 0, embed.stderr

    clean = seal_cli("verify", "--model", str(marked), "--key", str(key))
    clean_pass = clean.returncode == 0

    # The sealed weights must still drive predictions once imported back.
    imported = import_container(marked, manifest)
    original = torch.load(ckpt, weights_only=True)
    assert _agreement(imported.state, original) >= 0.95

    # Round-tripping without training leaves every byte alone.
    marked_ckpt = tmp_path / "marked.pt"
    torch.save(imported.state, marked_ckpt)
    untouched_ckpt = tmp_path / "untouched.pt"
    finetune_attack(marked_ckpt, learning_rate=0.001, epochs=0,
                    out_path=untouched_ckpt)
    round_trip = tmp_path / "round_trip.tseal"
    export_checkpoint(untouched_ckpt, manifest, round_trip,
                      metadata=imported.metadata)
    assert round_trip.read_bytes() == marked.read_bytes()
    assert seal_cli("verify", "--model", str(round_trip),
                    "--key", str(key)).returncode == 0

    # One epoch of SGD at lr 0.001, then the same export path.
    tuned_ckpt = tmp_path / "tuned.pt"
    finetune_attack(marked_ckpt, learning_rate=0.001, epochs=1,
                    out_path=tuned_ckpt)
    tuned = tmp_path / "tuned.tseal"
    export_checkpoint(tuned_ckpt, manifest, tuned, metadata=imported.metadata)
    verdict = seal_cli("verify", "--model", str(tuned), "--key", str(key))
    tuned_fail = verdict.returncode == 1
    assert "tamper" in verdict.stdout

    print(f"ACCEPTANCE finetune-detection: clean_verify_pass={clean_pass} "
          f"tuned_verify_fail={tuned_fail}")
    assert clean_pass
    assert tuned_fail


def test_finetuned_model_still_predicts(tmp_path):
    """The attack produces a working model; only the seal breaks."""
    ckpt = tmp_path / "pre.pt"
    pretrain(ckpt)
    tuned = tmp_path / "tuned.pt"
    finetune_attack(ckpt, learning_rate=0.001, epochs=1, out_path=tuned)

    state = torch.load(tuned, weights_only=True)
    before = torch.load(ckpt, weights_only=True)
    assert any(not torch.equal(state[k], before[k]) for k in state)

    model = TinyCNN()
    model.load_state_dict(state)
    model.eval()
    x, y = make_dataset(seed=321)
    with torch.no_grad():
        accuracy = (model(x).argmax(dim=1) == y).float().mean().item()
    assert accuracy >= 0.8


def test_zero_epochs_never_touches_weights(tmp_path):
    ckpt = tmp_path / "pre.pt"
    pretrain(ckpt)
    out = tmp_path / "same.pt"
    finetune_attack(ckpt, learning_rate=0.5, epochs=0, out_path=out)
    a = torch.load(ckpt, weights_only=True)
    b = torch.load(out, weights_only=True)
    assert set(a) == set(b)
    assert all(torch.equal(a[k], b[k]) for k in a)


def test_seal_survives_export_import_cycles(tmp_path):
    """Repeated framework round trips must not erode the seal."""
    ckpt = tmp_path / "pre.pt"
    pretrain(ckpt)
    manifest = tinycnn_manifest(owner="cycle", model_name="tinycnn")
    plain = tmp_path / "plain.tseal"
    export_checkpoint(ckpt, manifest, plain)

    key = tmp_path / "key.hex"
    seal_cli("keygen", "--out", str(key))
    marked = tmp_path / "marked.tseal"
    seal_cli("embed", "--model", str(plain), "--key", str(key),
             "--out", str(marked), "--secret", "cycles")

    current = marked
    for i in range(3):
        imported = import_container(current, manifest)
        nxt = tmp_path / f"cycle{i}.tseal"
        export_state(imported.state, manifest, nxt, metadata=imported.metadata)
        current = nxt
    assert current.read_bytes() == marked.read_bytes()
    assert seal_cli("verify", "--model", str(current),
                    "--key", str(key)).returncode == 0
