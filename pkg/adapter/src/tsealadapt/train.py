"""A small convolutional classifier plus the fine-tune attack demo.

Everything here is seeded, so checkpoints, exports, and attack outcomes
reproduce bit-for-bit across runs on the same platform.
"""

from __future__ import annotations

import os

import torch
from torch import nn
from torch.nn import functional as F

from .manifest import ExportManifest

CLASS_NAMES = ("circle", "stripe", "checker")


class TinyCNN(nn.Module):
    """Two conv blocks and two linear layers over 1x8x8 inputs."""

    def __init__(self, n_classes: int = len(CLASS_NAMES)):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 16, 3, padding=1)
        self.conv2 = nn.Conv2d(16, 64, 3, padding=1)
        self.fc1 = nn.Linear(64 * 4 * 4, 32)
        self.fc2 = nn.Linear(32, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.relu(self.conv2(x))
        x = x.flatten(1)
        x = F.relu(self.fc1(x))
        return self.fc2(x)


def tinycnn_manifest(**metadata: str) -> ExportManifest:
    """Manifest mapping every TinyCNN state-dict tensor to a container layer.

    fc2 carries the class logits, so it is the designated output layer;
    everything too small to carry a mark falls out as excluded on its own.
    """
    names = ["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias",
             "fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"]
    return ExportManifest(
        framework="torch",
        framework_version=torch.__version__,
        name_map={n: n.replace(".", "_") for n in names},
        output_layer="fc2_weight",
        class_map=list(CLASS_NAMES),
        metadata=dict(metadata),
    )


def make_dataset(n_per_class: int = 64,
                 seed: int = 7) -> tuple[torch.Tensor, torch.Tensor]:
    """Synthetic 3-class images: a fixed pattern per class plus noise.

    The class patterns come from their own constant so every seed
    samples the same task; `seed` only varies the noise draw.
    """
    patterns = torch.randn(len(CLASS_NAMES), 1, 8, 8,
                           generator=torch.Generator().manual_seed(0xC1A55))
    g = torch.Generator().manual_seed(seed)
    xs, ys = [], []
    for label in range(len(CLASS_NAMES)):
        noise = 0.3 * torch.randn(n_per_class, 1, 8, 8, generator=g)
        xs.append(patterns[label] + noise)
        ys.append(torch.full((n_per_class,), label, dtype=torch.long))
    return torch.cat(xs), torch.cat(ys)


def _train(model: nn.Module, lr: float, epochs: int, seed: int) -> None:
    x, y = make_dataset()
    opt = torch.optim.SGD(model.parameters(), lr=lr, momentum=0.9)
    loss_fn = nn.CrossEntropyLoss()
    g = torch.Generator().manual_seed(seed)
    model.train()
    for _ in range(epochs):
        for batch in torch.randperm(len(x), generator=g).split(32):
            opt.zero_grad()
            loss_fn(model(x[batch]), y[batch]).backward()
            opt.step()


def pretrain(out_path: str | os.PathLike, epochs: int = 30,
             lr: float = 0.05, seed: int = 11) -> None:
    """Train a fresh TinyCNN to convergence and save its state dict."""
    torch.manual_seed(seed)
    model = TinyCNN()
    _train(model, lr=lr, epochs=epochs, seed=seed + 1)
    torch.save(model.state_dict(), out_path)


def finetune_attack(checkpoint_path: str | os.PathLike, learning_rate: float,
                    epochs: int, out_path: str | os.PathLike,
                    seed: int = 29) -> None:
    """Resume training from a checkpoint, as an attacker would.

    With epochs=0 the optimizer never steps and the saved weights equal
    the input bit-for-bit; any real epoch perturbs every trainable
    tensor far beyond what a fragile mark survives.
    """
    model = TinyCNN()
    model.load_state_dict(torch.load(checkpoint_path, map_location="cpu",
                                     weights_only=True))
    _train(model, lr=learning_rate, epochs=epochs, seed=seed)
    torch.save(model.state_dict(), out_path)
