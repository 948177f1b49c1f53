"""Minimal binary-PGM (P5) reading for training data.

Understands the on-disk layout the attack engine emits: one directory per
class (lexicographic class order), P5 files inside, maxval up to 255,
header comments tolerated.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_WS = frozenset(b" \t\n\r\x0b\x0c")


def _tokens(data: bytes, count: int, pos: int) -> tuple[list[int], int]:
    fields = []
    n = len(data)
    while len(fields) < count:
        while pos < n and (data[pos] in _WS or data[pos] == 0x23):
            if data[pos] == 0x23:
                while pos < n and data[pos] not in (0x0A, 0x0D):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != 0x23:
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        fields.append(int(data[start:pos]))
    return fields, pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Load one P5 file as a uint8 array of shape [height, width]."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    (width, height, maxval), pos = _tokens(data, 3, 2)
    if not (1 <= maxval <= 255):
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace before payload
    payload = data[pos : pos + width * height]
    if len(payload) != width * height:
        raise ValueError(f"{path}: truncated pixel payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def load_class_tree(root: str | Path):
    """Read `<root>/<class>/*.pgm`; returns (images, labels, class_names)."""
    root = Path(root)
    class_dirs = sorted((p for p in root.iterdir() if p.is_dir()),
                        key=lambda p: p.name.encode())
    if not class_dirs:
        raise ValueError(f"{root}: no class directories")
    images, labels = [], []
    for label, class_dir in enumerate(class_dirs):
        for path in sorted(class_dir.glob("*.pgm"), key=lambda p: p.name.encode()):
            images.append(read_pgm(path))
            labels.append(label)
    if not images:
        raise ValueError(f"{root}: no PGM files found")
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise ValueError(f"{root}: mixed image shapes {sorted(shapes)}")
    return np.stack(images), np.array(labels), [d.name for d in class_dirs]
