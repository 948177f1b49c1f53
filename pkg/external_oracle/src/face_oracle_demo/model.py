"""The served classifier: a small PyTorch MLP over flattened pixels.

`ServedModel` is what the protocol server needs: expected dimensions,
class names, and a predict function from a raw pixel buffer to a
probability vector. The demo network is deliberately tiny so training on
the attack engine's synthetic datasets takes seconds on a CPU; swap in
any model you like by wrapping it in a ServedModel.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from .pgm import load_class_tree

HIDDEN_UNITS = 32


@dataclass(frozen=True)
class ServedModel:
    """Everything the wire server needs to answer classify requests."""

    width: int
    height: int
    class_names: tuple[str, ...]
    predict: Callable[[bytes], list[float]]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


class TinyFaceNet(nn.Module):
    def __init__(self, in_features: int, num_classes: int):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(in_features, HIDDEN_UNITS),
            nn.ReLU(),
            nn.Linear(HIDDEN_UNITS, num_classes),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


def _wrap(net: TinyFaceNet, width: int, height: int,
          class_names: Sequence[str]) -> ServedModel:
    net.eval()

    @torch.no_grad()
    def predict(pixels: bytes) -> list[float]:
        arr = np.frombuffer(pixels, dtype=np.uint8).astype(np.float32) / 255.0
        logits = net(torch.from_numpy(arr).unsqueeze(0))
        probs = torch.softmax(logits.double(), dim=1).squeeze(0)
        return [float(v) for v in probs]

    return ServedModel(width, height, tuple(class_names), predict)


def demo_model(width: int, height: int, num_classes: int,
               seed: int = 42) -> ServedModel:
    """An untrained but deterministic model; handy for protocol checks."""
    torch.manual_seed(seed)
    net = TinyFaceNet(width * height, num_classes)
    names = tuple(f"class{c:02d}" for c in range(num_classes))
    return _wrap(net, width, height, names)


def train_model(data_dir: str | Path, epochs: int = 30, seed: int = 0,
                learning_rate: float = 1e-2) -> tuple[ServedModel, dict]:
    """Fit the demo net on a class-per-directory PGM tree.

    Returns the served model plus a checkpoint dictionary for save_model.
    """
    images, labels, class_names = load_class_tree(data_dir)
    height, width = images.shape[1], images.shape[2]
    x = torch.from_numpy(
        images.reshape(len(images), -1).astype(np.float32) / 255.0
    )
    y = torch.from_numpy(labels.astype(np.int64))
    torch.manual_seed(seed)
    net = TinyFaceNet(width * height, len(class_names))
    optimizer = torch.optim.Adam(net.parameters(), lr=learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    net.train()
    for _ in range(epochs):
        optimizer.zero_grad()
        loss = loss_fn(net(x), y)
        loss.backward()
        optimizer.step()
    net.eval()
    with torch.no_grad():
        train_accuracy = float((net(x).argmax(dim=1) == y).float().mean())
    checkpoint = {
        "state_dict": net.state_dict(),
        "width": width,
        "height": height,
        "class_names": list(class_names),
        "train_accuracy": train_accuracy,
    }
    return _wrap(net, width, height, class_names), checkpoint


def save_model(checkpoint: dict, path: str | Path) -> None:
    torch.save(checkpoint, path)


def load_model(path: str | Path) -> ServedModel:
    checkpoint = torch.load(path, map_location="cpu", weights_only=True)
    width, height = checkpoint["width"], checkpoint["height"]
    names = checkpoint["class_names"]
    net = TinyFaceNet(width * height, len(names))
    net.load_state_dict(checkpoint["state_dict"])
    return _wrap(net, width, height, names)
