from collections import Counter

import numpy as np
import pytest

from facefool.dataset import (
    Dataset,
    LabeledImage,
    generate_synthetic,
    load_directory,
    make_class_templates,
    split_train_test,
)
from facefool.errors import DatasetError
from facefool.image import GrayscaleImage, save_pgm
from facefool.rng import Pcg32


def pgm_bytes(width, height, fill=7):
    return save_pgm(GrayscaleImage(width, height, bytes([fill]) * (width * height)))


# -- load_directory ---------------------------------------------------------

def test_load_minimal_layout(tmp_path):
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        (tmp_path / name / "one.pgm").write_bytes(pgm_bytes(4, 4))
    ds = load_directory(tmp_path)
    assert ds.num_classes == 2
    assert len(ds.items) == 2
    assert ds.class_names == ("a", "b")


def test_load_lexicographic_class_order(tmp_path):
    for name in ("b", "a"):
        (tmp_path / name).mkdir()
        (tmp_path / name / "x.pgm").write_bytes(pgm_bytes(4, 4))
    ds = load_directory(tmp_path)
    assert ds.class_names[0] == "a"
    assert ds.items[0].label == 0


def test_load_dimension_mismatch(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "one.pgm").write_bytes(pgm_bytes(4, 4))
    (tmp_path / "a" / "two.pgm").write_bytes(pgm_bytes(5, 4))
    with pytest.raises(DatasetError, match="dimensions"):
        load_directory(tmp_path)


def test_load_empty_root(tmp_path):
    with pytest.raises(DatasetError, match="no class directories"):
        load_directory(tmp_path)


def test_load_unreadable_file(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "bad.pgm").write_bytes(b"not a pgm")
    with pytest.raises(DatasetError, match="bad.pgm"):
        load_directory(tmp_path)


# -- split_train_test -------------------------------------------------------

def make_dataset(num_classes, per_class, width=4, height=4):
    items = []
    for c in range(num_classes):
        for i in range(per_class):
            img = GrayscaleImage(width, height, bytes([c]) * (width * height))
            items.append(LabeledImage(img, c, f"img{i:03d}"))
    names = tuple(f"class{c:02d}" for c in range(num_classes))
    return Dataset(tuple(items), num_classes, names)


def test_split_full_scale_counts():
    ds = make_dataset(38, 65)
    train, test = split_train_test(ds, 1, Pcg32(1))
    assert len(test.items) == 38
    assert len(train.items) == 2432


def test_split_zero_is_degenerate():
    ds = make_dataset(3, 4)
    train, test = split_train_test(ds, 0, Pcg32(1))
    assert test.items == ()
    assert train.items == ds.items


def test_split_insufficient_items():
    ds = make_dataset(3, 4)
    with pytest.raises(DatasetError, match="cannot hold out"):
        split_train_test(ds, 4, Pcg32(1))


def test_split_disjoint_union():
    ds = make_dataset(5, 7)
    train, test = split_train_test(ds, 2, Pcg32(9))
    key = lambda it: (it.label, it.source_name)
    combined = Counter(map(key, train.items)) + Counter(map(key, test.items))
    assert combined == Counter(map(key, ds.items))
    for c in range(5):
        assert sum(1 for it in test.items if it.label == c) == 2


def test_split_deterministic():
    ds = make_dataset(4, 6)
    a = split_train_test(ds, 2, Pcg32(3))
    b = split_train_test(ds, 2, Pcg32(3))
    assert a == b
    c = split_train_test(ds, 2, Pcg32(4))
    assert a != c


# -- generate_synthetic -----------------------------------------------------

def test_synthetic_shape_contract():
    ds = generate_synthetic(2, 2, 8, 8, Pcg32(1))
    assert len(ds.items) == 4
    assert ds.num_classes == 2
    assert all(it.image.width == 8 and it.image.height == 8 for it in ds.items)


def test_synthetic_deterministic():
    a = generate_synthetic(3, 4, 12, 12, Pcg32(42))
    b = generate_synthetic(3, 4, 12, 12, Pcg32(42))
    assert a == b


def test_synthetic_rejects_bad_counts():
    with pytest.raises(DatasetError):
        generate_synthetic(1, 4, 8, 8, Pcg32(0))
    with pytest.raises(DatasetError):
        generate_synthetic(3, 1, 8, 8, Pcg32(0))


def test_template_separation_enforced():
    separation = 4.0
    templates = make_class_templates(6, 24, 24, Pcg32(11), separation)
    for i in range(len(templates)):
        for j in range(i):
            diff = np.mean(
                np.abs(templates[i].astype(float) - templates[j].astype(float))
            )
            assert diff >= separation


def test_nearest_template_is_perfect_when_noise_is_small():
    # noise amplitude at 1/4 of the enforced separation keeps even a
    # nearest-template classifier perfect
    separation = 4.0
    amplitude = 1
    seed = 23
    templates = make_class_templates(4, 16, 16, Pcg32(seed), separation)
    ds = generate_synthetic(
        4, 5, 16, 16, Pcg32(seed),
        noise_amplitude=amplitude, separation=separation,
    )
    stack = np.stack([t.astype(float) for t in templates])
    for item in ds.items:
        arr = item.image.to_array().astype(float)
        distances = ((stack - arr) ** 2).sum(axis=(1, 2))
        assert int(np.argmin(distances)) == item.label
