"""Labeled grayscale-image datasets.

Supports three sources: a directory tree with one subdirectory per class
(lexicographic class order, PGM files inside), deterministic train/test
splitting, and a synthetic generator that builds a desk-scale learnable
dataset from smooth per-class templates so nothing external is required.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError, PgmError
from .image import GrayscaleImage, load_pgm
from .rng import Pcg32

# Desk-scale defaults: 8 classes x 40 images at 56x64 keeps the 7x8 grid
# of 56 cells (cell side 8) at a fraction of the 168x192 cost.
DESK_NUM_CLASSES = 8
DESK_PER_CLASS = 40
DESK_WIDTH = 56
DESK_HEIGHT = 64
DESK_SEED = 7

DEFAULT_NOISE_AMPLITUDE = 8
DEFAULT_SEPARATION = 4.0

# Template texture. All classes share one base field (a base intensity
# plus a few broad bumps), the way faces share global structure; each
# class adds its own smaller identity bumps. Keeping identities subtle
# relative to the shared structure is what makes the attack orderings
# measurable at desk scale: a classifier facing wildly different classes
# shrugs off band noise entirely.
SHARED_BLOB_COUNT = 3
SHARED_SIGMA_FRACTIONS = (0.25, 0.5)
SHARED_MAGNITUDE_RANGE = (30.0, 80.0)
IDENTITY_SIGMA_FRACTIONS = (0.12, 0.3)
IDENTITY_MAGNITUDE_RANGE = (20.0, 45.0)


@dataclass(frozen=True)
class LabeledImage:
    image: GrayscaleImage
    label: int
    source_name: str


@dataclass(frozen=True)
class Dataset:
    items: tuple[LabeledImage, ...]
    num_classes: int
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.class_names) != self.num_classes:
            raise DatasetError(
                f"{len(self.class_names)} class names for {self.num_classes} classes"
            )
        for item in self.items:
            if not (0 <= item.label < self.num_classes):
                raise DatasetError(
                    f"label {item.label} of {item.source_name!r} outside "
                    f"[0, {self.num_classes})"
                )
        dims = {(item.image.width, item.image.height) for item in self.items}
        if len(dims) > 1:
            raise DatasetError(f"mixed image dimensions: {sorted(dims)}")

    @property
    def width(self) -> int:
        return self.items[0].image.width

    @property
    def height(self) -> int:
        return self.items[0].image.height

    def class_items(self, label: int) -> list[LabeledImage]:
        return [item for item in self.items if item.label == label]


def load_directory(root: str | Path) -> Dataset:
    """Load `<root>/<class_name>/*.pgm` with classes in lexicographic order."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    class_dirs = sorted((p for p in root.iterdir() if p.is_dir()),
                        key=lambda p: p.name.encode())
    if not class_dirs:
        raise DatasetError(f"dataset root {root} contains no class directories")
    items: list[LabeledImage] = []
    for label, class_dir in enumerate(class_dirs):
        files = sorted(class_dir.glob("*.pgm"), key=lambda p: p.name.encode())
        if not files:
            raise DatasetError(f"class directory {class_dir} holds no PGM files")
        for path in files:
            try:
                image = load_pgm(path.read_bytes())
            except (OSError, PgmError) as err:
                raise DatasetError(f"{path}: {err}") from err
            items.append(LabeledImage(image, label, path.stem))
    return Dataset(tuple(items), len(class_dirs), tuple(d.name for d in class_dirs))


def split_train_test(
    ds: Dataset, per_class_test: int, rng: Pcg32
) -> tuple[Dataset, Dataset]:
    """Hold out `per_class_test` items per class, chosen by the seeded rng.

    Both halves keep the original item order; together they are exactly the
    input. Every class must have strictly more items than the holdout size.
    """
    if per_class_test < 0:
        raise DatasetError(f"per_class_test must be >= 0, got {per_class_test}")
    test_indices: set[int] = set()
    for label in range(ds.num_classes):
        pool = [i for i, item in enumerate(ds.items) if item.label == label]
        if len(pool) <= per_class_test:
            raise DatasetError(
                f"class {ds.class_names[label]!r} has {len(pool)} items, "
                f"cannot hold out {per_class_test}"
            )
        for k in range(per_class_test):
            j = k + rng.randbelow(len(pool) - k)
            pool[k], pool[j] = pool[j], pool[k]
        test_indices.update(pool[:per_class_test])
    train = tuple(item for i, item in enumerate(ds.items) if i not in test_indices)
    test = tuple(item for i, item in enumerate(ds.items) if i in test_indices)
    return (
        Dataset(train, ds.num_classes, ds.class_names),
        Dataset(test, ds.num_classes, ds.class_names),
    )


def _add_blob(field: np.ndarray, rng: Pcg32, xs: np.ndarray, ys: np.ndarray,
              width: int, height: int, sigma_fractions: tuple[float, float],
              magnitude_range: tuple[float, float]) -> None:
    scale = min(width, height)
    cx = rng.randint(0, width - 1)
    cy = rng.randint(0, height - 1)
    sig_lo, sig_hi = sigma_fractions
    sigma = (sig_lo + rng.random() * (sig_hi - sig_lo)) * scale
    mag_lo, mag_hi = magnitude_range
    magnitude = mag_lo + rng.random() * (mag_hi - mag_lo)
    sign = 1.0 if rng.randbelow(2) == 0 else -1.0
    field += sign * magnitude * np.exp(
        -((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma)
    )


def make_class_templates(
    num_classes: int, width: int, height: int, rng: Pcg32,
    separation: float = DEFAULT_SEPARATION,
) -> list[np.ndarray]:
    """Smooth per-class intensity templates over a shared base field.

    The shared field is a base intensity plus a few broad Gaussian bumps;
    every class then adds 3-6 smaller identity bumps of its own. A class's
    bumps are redrawn until its template differs from every earlier one by
    at least `separation` in mean absolute intensity, keeping the classes
    distinguishable.
    """
    ys, xs = np.mgrid[0:height, 0:width]
    base = rng.randint(80, 180)
    shared = np.full((height, width), float(base))
    for _ in range(SHARED_BLOB_COUNT):
        _add_blob(shared, rng, xs, ys, width, height,
                  SHARED_SIGMA_FRACTIONS, SHARED_MAGNITUDE_RANGE)
    templates: list[np.ndarray] = []
    for _ in range(num_classes):
        for _attempt in range(200):
            field = shared.copy()
            for _bump in range(rng.randint(3, 6)):
                _add_blob(field, rng, xs, ys, width, height,
                          IDENTITY_SIGMA_FRACTIONS, IDENTITY_MAGNITUDE_RANGE)
            candidate = np.clip(np.rint(field), 0, 255).astype(np.uint8)
            cand_f = candidate.astype(np.float64)
            if all(
                np.mean(np.abs(cand_f - t.astype(np.float64))) >= separation
                for t in templates
            ):
                templates.append(candidate)
                break
        else:
            raise DatasetError(
                f"could not draw {num_classes} templates with pairwise mean "
                f"absolute separation >= {separation}"
            )
    return templates


def _noisy_copy(template: np.ndarray, amplitude: int, rng: Pcg32) -> bytes:
    """Template plus per-pixel uniform noise in [-amplitude, amplitude], clamped."""
    span = 2 * amplitude + 1
    threshold = (1 << 32) % span
    next_u32 = rng.next_u32
    out = bytearray(template.size)
    for i, v in enumerate(template.ravel().tolist()):
        r = next_u32()
        while r < threshold:
            r = next_u32()
        v = v + r % span - amplitude
        out[i] = 0 if v < 0 else 255 if v > 255 else v
    return bytes(out)


def generate_synthetic(
    num_classes: int, per_class: int, width: int, height: int, rng: Pcg32,
    noise_amplitude: int = DEFAULT_NOISE_AMPLITUDE,
    separation: float = DEFAULT_SEPARATION,
) -> Dataset:
    """Generate a labeled dataset of noisy copies of per-class templates."""
    if num_classes < 2:
        raise DatasetError(f"need at least 2 classes, got {num_classes}")
    if per_class < 2:
        raise DatasetError(f"need at least 2 images per class, got {per_class}")
    if width < 1 or height < 1:
        raise DatasetError(f"invalid dimensions {width}x{height}")
    if noise_amplitude < 0:
        raise DatasetError(f"negative noise amplitude {noise_amplitude}")
    class_pad = max(2, len(str(num_classes - 1)))
    item_pad = max(3, len(str(per_class - 1)))
    templates = make_class_templates(num_classes, width, height, rng, separation)
    items: list[LabeledImage] = []
    for label, template in enumerate(templates):
        for i in range(per_class):
            pixels = _noisy_copy(template, noise_amplitude, rng)
            items.append(
                LabeledImage(
                    GrayscaleImage(width, height, pixels),
                    label,
                    f"img{i:0{item_pad}d}",
                )
            )
    names = tuple(f"class{c:0{class_pad}d}" for c in range(num_classes))
    return Dataset(tuple(items), num_classes, names)


def desk_dataset(seed: int = DESK_SEED) -> Dataset:
    """The default desk-scale synthetic dataset (8 classes x 40 at 56x64)."""
    return generate_synthetic(
        DESK_NUM_CLASSES, DESK_PER_CLASS, DESK_WIDTH, DESK_HEIGHT, Pcg32(seed)
    )
