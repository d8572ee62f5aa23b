import subprocess
import sys

import numpy as np
import pytest
import torch

from tsealadapt import TinyCNN, tinycnn_manifest


def seal_cli(*args: str) -> subprocess.CompletedProcess:
    """Run the sealing tool out of process; that binary boundary is the
    only contact the adapter has with it."""
    return subprocess.run([sys.executable, "-m", "tensorseal", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    """An untrained but seeded TinyCNN state dict on disk."""
    torch.manual_seed(3)
    path = tmp_path_factory.mktemp("ckpt") / "tiny.pt"
    torch.save(TinyCNN().state_dict(), path)
    return path


@pytest.fixture(scope="session")
def manifest():
    return tinycnn_manifest(owner="adapter tests", model_name="tinycnn")


@pytest.fixture
def rng():
    return np.random.default_rng(99)
